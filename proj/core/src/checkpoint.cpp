#include "genac/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace genac {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'N', 'A', 'C', 'C', 'P', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, static_cast<std::uint32_t>(ckpt.kind));
  write_raw(out, static_cast<std::int32_t>(ckpt.dims.vocab_size));
  write_raw(out, static_cast<std::int32_t>(ckpt.dims.context_window));
  write_raw(out, static_cast<std::int32_t>(ckpt.dims.embed_dim));
  write_raw(out, static_cast<std::int32_t>(ckpt.dims.hidden_dim));
  write_raw(out, static_cast<std::int32_t>(ckpt.dims.max_positions));
  for (const double a : ckpt.aux) write_raw(out, a);
  write_raw(out, static_cast<std::uint64_t>(ckpt.params.size()));
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());

  Checkpoint ckpt;
  ckpt.kind = static_cast<CheckpointKind>(read_raw<std::uint32_t>(in, path));
  ckpt.dims.vocab_size = read_raw<std::int32_t>(in, path);
  ckpt.dims.context_window = read_raw<std::int32_t>(in, path);
  ckpt.dims.embed_dim = read_raw<std::int32_t>(in, path);
  ckpt.dims.hidden_dim = read_raw<std::int32_t>(in, path);
  ckpt.dims.max_positions = read_raw<std::int32_t>(in, path);
  for (double& a : ckpt.aux) a = read_raw<double>(in, path);
  const auto count = read_raw<std::uint64_t>(in, path);
  ckpt.params.resize(count);
  in.read(reinterpret_cast<char*>(ckpt.params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated parameters in " + path.string());
  return ckpt;
}

Checkpoint checkpoint_of_actor(const SeqModel& actor, int modulus) {
  Checkpoint c;
  c.kind = CheckpointKind::actor;
  c.dims = actor.dims();
  c.aux[0] = static_cast<double>(modulus);
  c.params.assign(actor.params().begin(), actor.params().end());
  return c;
}

Checkpoint checkpoint_of_gen_critic(const GenCriticBundle& critic) {
  Checkpoint c;
  c.kind = CheckpointKind::gen_critic;
  c.dims = critic.model.dims();
  c.aux[0] = static_cast<double>(critic.vocab.p_cap);
  c.aux[1] = static_cast<double>(critic.vocab.t_cap);
  c.aux[2] = critic.hint.value;
  c.aux[3] = critic.hint.momentum;
  c.aux[4] = critic.icc_enabled ? 1.0 : 0.0;
  c.aux[5] = static_cast<double>(critic.max_trace_len);
  c.aux[6] = static_cast<double>(critic.actor_tag);
  c.params.assign(critic.model.params().begin(), critic.model.params().end());
  return c;
}

Checkpoint checkpoint_of_disc_critic(const DiscriminativeCritic& critic) {
  Checkpoint c;
  c.kind = CheckpointKind::disc_critic;
  c.dims = critic.dims();
  c.aux[0] = critic.sigmoid_head() ? 1.0 : 0.0;
  c.params.assign(critic.params().begin(), critic.params().end());
  return c;
}

namespace {

void check_kind(const Checkpoint& ckpt, CheckpointKind want, const char* what) {
  if (ckpt.kind != want)
    throw std::runtime_error(std::string("checkpoint: expected a ") + what);
}

void restore_params(std::span<double> dst, const std::vector<double>& src, const char* what) {
  if (dst.size() != src.size())
    throw std::runtime_error(std::string("checkpoint: parameter count mismatch for ") + what);
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace

SeqModel actor_from_checkpoint(const Checkpoint& ckpt) {
  check_kind(ckpt, CheckpointKind::actor, "actor checkpoint");
  SeqModel m(ckpt.dims);
  restore_params(m.mutable_params(), ckpt.params, "actor");
  return m;
}

GenCriticBundle gen_critic_from_checkpoint(const Checkpoint& ckpt) {
  check_kind(ckpt, CheckpointKind::gen_critic, "generative-critic checkpoint");
  GenCriticBundle b{SeqModel(ckpt.dims),
                    CriticVocab{static_cast<int>(ckpt.aux[1]), static_cast<int>(ckpt.aux[0])},
                    IccHint{ckpt.aux[2], ckpt.aux[3]},
                    static_cast<int>(ckpt.aux[6]),
                    ckpt.aux[4] != 0.0,
                    static_cast<int>(ckpt.aux[5])};
  restore_params(b.model.mutable_params(), ckpt.params, "generative critic");
  return b;
}

DiscriminativeCritic disc_critic_from_checkpoint(const Checkpoint& ckpt) {
  check_kind(ckpt, CheckpointKind::disc_critic, "discriminative-critic checkpoint");
  DiscriminativeCritic c(ckpt.dims, ckpt.aux[0] != 0.0);
  restore_params(c.mutable_params(), ckpt.params, "discriminative critic");
  return c;
}

}  // namespace genac
