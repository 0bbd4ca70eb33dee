#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "genac/critic.hpp"
#include "genac/model.hpp"

namespace genac {

// Binary checkpoint, little-endian throughout:
//   bytes 0..7    magic "GENACCP1"
//   u32           kind (1 actor, 2 generative critic, 3 discriminative critic)
//   i32 x 5       dims: vocab_size, context_window, embed_dim, hidden_dim,
//                 max_positions
//   f64 x 8       aux slots (kind-specific, see below)
//   u64           parameter count
//   f64 x count   parameters
// Aux slots: actor -> [modulus]; generative critic -> [p_cap, t_cap,
// hint value, hint momentum, icc_enabled, max_trace_len, actor_tag];
// discriminative critic -> [sigmoid_head]. Unused slots are zero.
enum class CheckpointKind : std::uint32_t {
  actor = 1,
  gen_critic = 2,
  disc_critic = 3,
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::actor;
  ModelDims dims;
  std::array<double, 8> aux{};
  std::vector<double> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Typed wrappers. Loaders throw std::runtime_error on a kind mismatch.
Checkpoint checkpoint_of_actor(const SeqModel& actor, int modulus);
Checkpoint checkpoint_of_gen_critic(const GenCriticBundle& critic);
Checkpoint checkpoint_of_disc_critic(const DiscriminativeCritic& critic);

SeqModel actor_from_checkpoint(const Checkpoint& ckpt);
GenCriticBundle gen_critic_from_checkpoint(const Checkpoint& ckpt);
DiscriminativeCritic disc_critic_from_checkpoint(const Checkpoint& ckpt);

}  // namespace genac
