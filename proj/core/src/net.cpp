#include "genac/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace genac {

// Parameter layout (all doubles, contiguous):
//   [0, d*F)            W_e, column-major: W_e[col*d + r]
//   [off_be, +d)        b_e
//   [off_wh, +h*d)      W_h, row-major: W_h[row*d + c]     (h > 0 only)
//   [off_bh, +h)        b_h                                 (h > 0 only)
//   [off_wo, +out*top)  W_o, row-major: W_o[o*top + j]
//   [off_bo, +out)      b_o
// Feature columns: slot i in [0,k) holds the i-th most recent token (PAD id
// V when the context is shorter than k) at column i*(V+1)+token; the position
// slot is column k*(V+1) + min(len, max_positions-1).

std::int64_t NetDims::param_count() const {
  const std::int64_t d = embed_dim, f = feature_dim(), h = hidden_dim;
  const std::int64_t out = output_dim, top = top_dim();
  std::int64_t p = d * f + d;
  if (h > 0) p += h * d + h;
  p += out * top + out;
  return p;
}

void NetDims::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("NetDims: " + msg); };
  if (vocab_size < 1) fail("vocab_size must be >= 1");
  if (context_window < 1) fail("context_window must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (hidden_dim < 0) fail("hidden_dim must be >= 0");
  if (output_dim < 1) fail("output_dim must be >= 1");
  if (max_positions < 1) fail("max_positions must be >= 1");
}

FeedForwardNet::FeedForwardNet(NetDims dims) : dims_(dims) {
  dims_.validate();
  const std::int64_t d = dims_.embed_dim, f = dims_.feature_dim(), h = dims_.hidden_dim;
  const std::int64_t out = dims_.output_dim, top = dims_.top_dim();
  off_be_ = d * f;
  off_wh_ = off_be_ + d;
  off_bh_ = off_wh_ + (h > 0 ? h * d : 0);
  off_wo_ = off_bh_ + (h > 0 ? h : 0);
  off_bo_ = off_wo_ + out * top;
  params_.assign(static_cast<std::size_t>(off_bo_ + out), 0.0);
}

void FeedForwardNet::randomize(double scale, RngStream& rng) {
  for (double& p : params_) p = scale * rng.gaussian();
}

void FeedForwardNet::active_columns(std::span<const int> context, std::span<int> cols) const {
  const int k = dims_.context_window;
  const int v1 = dims_.vocab_size + 1;
  const int len = static_cast<int>(context.size());
  for (int i = 0; i < k; ++i) {
    int tok = dims_.vocab_size;  // PAD
    if (i < len) {
      tok = context[static_cast<std::size_t>(len - 1 - i)];
      if (tok < 0 || tok >= dims_.vocab_size)
        throw std::invalid_argument("FeedForwardNet: context token out of range: " + std::to_string(tok));
    }
    cols[static_cast<std::size_t>(i)] = i * v1 + tok;
  }
  const int pos = len < dims_.max_positions ? len : dims_.max_positions - 1;
  cols[static_cast<std::size_t>(k)] = k * v1 + pos;
}

void FeedForwardNet::embed(std::span<const int> cols, std::span<double> a) const {
  const int d = dims_.embed_dim;
  const double* we = params_.data();
  const double* be = params_.data() + off_be_;
  for (int r = 0; r < d; ++r) a[static_cast<std::size_t>(r)] = be[r];
  for (const int col : cols) {
    const double* w = we + static_cast<std::int64_t>(col) * d;
    for (int r = 0; r < d; ++r) a[static_cast<std::size_t>(r)] += w[r];
  }
  for (int r = 0; r < d; ++r) a[static_cast<std::size_t>(r)] = std::tanh(a[static_cast<std::size_t>(r)]);
}

void FeedForwardNet::output(std::span<const int> context, std::span<double> out) const {
  const int d = dims_.embed_dim, h = dims_.hidden_dim;
  const int odim = dims_.output_dim, top = dims_.top_dim();

  std::vector<int> cols(static_cast<std::size_t>(dims_.context_window + 1));
  active_columns(context, cols);

  std::vector<double> a(static_cast<std::size_t>(d));
  embed(cols, a);

  std::vector<double> z;
  const double* topv = a.data();
  if (h > 0) {
    z.resize(static_cast<std::size_t>(h));
    const double* wh = params_.data() + off_wh_;
    const double* bh = params_.data() + off_bh_;
    for (int row = 0; row < h; ++row) {
      double s = bh[row];
      const double* w = wh + static_cast<std::int64_t>(row) * d;
      for (int c = 0; c < d; ++c) s += w[c] * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(row)] = std::tanh(s);
    }
    topv = z.data();
  }

  const double* wo = params_.data() + off_wo_;
  const double* bo = params_.data() + off_bo_;
  for (int o = 0; o < odim; ++o) {
    double s = bo[o];
    const double* w = wo + static_cast<std::int64_t>(o) * top;
    for (int j = 0; j < top; ++j) s += w[j] * topv[j];
    out[static_cast<std::size_t>(o)] = s;
  }
}

void FeedForwardNet::accumulate_output_grad(std::span<const int> context,
                                            std::span<const double> dout,
                                            std::span<double> grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("FeedForwardNet: gradient buffer size mismatch");
  const int d = dims_.embed_dim, h = dims_.hidden_dim;
  const int odim = dims_.output_dim, top = dims_.top_dim();

  std::vector<int> cols(static_cast<std::size_t>(dims_.context_window + 1));
  active_columns(context, cols);

  // Recompute forward activations.
  std::vector<double> a(static_cast<std::size_t>(d));
  embed(cols, a);
  std::vector<double> z(static_cast<std::size_t>(h > 0 ? h : 0));
  if (h > 0) {
    const double* wh = params_.data() + off_wh_;
    const double* bh = params_.data() + off_bh_;
    for (int row = 0; row < h; ++row) {
      double s = bh[row];
      const double* w = wh + static_cast<std::int64_t>(row) * d;
      for (int c = 0; c < d; ++c) s += w[c] * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(row)] = std::tanh(s);
    }
  }
  const double* topv = h > 0 ? z.data() : a.data();

  // Output layer.
  std::vector<double> dtop(static_cast<std::size_t>(top), 0.0);
  {
    const double* wo = params_.data() + off_wo_;
    double* gwo = grad.data() + off_wo_;
    double* gbo = grad.data() + off_bo_;
    for (int o = 0; o < odim; ++o) {
      const double g = dout[static_cast<std::size_t>(o)];
      if (g == 0.0) continue;
      gbo[o] += g;
      const double* w = wo + static_cast<std::int64_t>(o) * top;
      double* gw = gwo + static_cast<std::int64_t>(o) * top;
      for (int j = 0; j < top; ++j) {
        gw[j] += g * topv[j];
        dtop[static_cast<std::size_t>(j)] += g * w[j];
      }
    }
  }

  // Hidden layer.
  std::vector<double> da(static_cast<std::size_t>(d), 0.0);
  if (h > 0) {
    const double* wh = params_.data() + off_wh_;
    double* gwh = grad.data() + off_wh_;
    double* gbh = grad.data() + off_bh_;
    for (int row = 0; row < h; ++row) {
      const double zi = z[static_cast<std::size_t>(row)];
      const double dz = dtop[static_cast<std::size_t>(row)] * (1.0 - zi * zi);
      if (dz == 0.0) continue;
      gbh[row] += dz;
      const double* w = wh + static_cast<std::int64_t>(row) * d;
      double* gw = gwh + static_cast<std::int64_t>(row) * d;
      for (int c = 0; c < d; ++c) {
        gw[c] += dz * a[static_cast<std::size_t>(c)];
        da[static_cast<std::size_t>(c)] += dz * w[c];
      }
    }
  } else {
    da = dtop;
  }

  // Embed layer: only active columns receive gradient.
  {
    double* gwe = grad.data();
    double* gbe = grad.data() + off_be_;
    for (int r = 0; r < d; ++r) {
      const double ar = a[static_cast<std::size_t>(r)];
      da[static_cast<std::size_t>(r)] *= (1.0 - ar * ar);
    }
    for (int r = 0; r < d; ++r) gbe[r] += da[static_cast<std::size_t>(r)];
    for (const int col : cols) {
      double* gw = gwe + static_cast<std::int64_t>(col) * d;
      for (int r = 0; r < d; ++r) gw[r] += da[static_cast<std::size_t>(r)];
    }
  }
}

void sgd_step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size())
    throw std::invalid_argument("sgd_step: size mismatch");
  if (lr < 0.0) throw std::invalid_argument("sgd_step: lr must be >= 0");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

Optimizer::Optimizer(Kind kind, double lr, std::size_t n_params) : kind_(kind), lr_(lr) {
  if (kind_ != Kind::sgd) m_.assign(n_params, 0.0);
  if (kind_ == Kind::adam) v_.assign(n_params, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  switch (kind_) {
    case Kind::sgd:
      sgd_step(params, grad, lr_);
      break;
    case Kind::momentum:
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = momentum_beta_ * m_[i] + grad[i];
        params[i] -= lr_ * m_[i];
      }
      break;
    case Kind::adam: {
      ++t_;
      const double bc1 = 1.0 - std::pow(adam_beta1_, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(adam_beta2_, static_cast<double>(t_));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = adam_beta1_ * m_[i] + (1.0 - adam_beta1_) * grad[i];
        v_[i] = adam_beta2_ * v_[i] + (1.0 - adam_beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + adam_eps_);
      }
      break;
    }
  }
}

Optimizer::Kind Optimizer::parse_kind(const std::string& name) {
  if (name == "sgd") return Kind::sgd;
  if (name == "momentum") return Kind::momentum;
  if (name == "adam") return Kind::adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

}  // namespace genac
