#include "spikerl/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "spikerl/surrogate.hpp"

namespace spikerl {

namespace {

Matrix uniform_matrix(int rows, int cols, Scalar bound, RandomStream& rng) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Vector uniform_vector(int n, Scalar bound, RandomStream& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-bound, bound);
  return v;
}

Matrix apply_activation(const MlpNetwork& net, const Matrix& pre) {
  switch (net.activation) {
    case Activation::rectifier:
      return pre.cwiseMax(0.0);
    case Activation::smooth_sigmoid:
      return pre.unaryExpr(
          [](Scalar z) { return 1.0 / (1.0 + std::exp(-z)); });
  }
  return pre;
}

// Derivative of the hidden activation given pre- and post-activation.
Matrix activation_grad(const MlpNetwork& net, const Matrix& pre,
                       const Matrix& act) {
  switch (net.activation) {
    case Activation::rectifier:
      return (pre.array() > 0.0).cast<Scalar>().matrix();
    case Activation::smooth_sigmoid:
      return (act.array() * (1.0 - act.array())).matrix();
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

}  // namespace

// ---------------------------------------------------------------- MLP ----

std::vector<int> MlpNetwork::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights.front().cols()));
  for (const Matrix& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

long MlpNetwork::param_count() const {
  long n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

Vector MlpNetwork::to_flat() const {
  Vector flat(param_count());
  long at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) =
        Eigen::Map<const Vector>(weights[l].data(), weights[l].size());
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

void MlpNetwork::from_flat(const Vector& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("MlpNetwork::from_flat: size mismatch");
  long at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::Map<Vector>(weights[l].data(), weights[l].size()) =
        flat.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = flat.segment(at, biases[l].size());
    at += biases[l].size();
  }
}

MlpNetwork make_mlp(const std::vector<int>& sizes, Activation activation,
                    RandomStream& rng) {
  if (sizes.size() < 2)
    throw std::invalid_argument("make_mlp: need at least input and output");
  MlpNetwork net;
  net.activation = activation;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(sizes[l]));
    net.weights.push_back(uniform_matrix(sizes[l + 1], sizes[l], bound, rng));
    net.biases.push_back(uniform_vector(sizes[l + 1], bound, rng));
  }
  return net;
}

Matrix mlp_forward(const MlpNetwork& net, const Matrix& x) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  Matrix a = x;
  const int last = net.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Matrix pre = (net.weights[l] * a).colwise() + net.biases[l];
    a = (l == last) ? pre : apply_activation(net, pre);
  }
  return a;
}

Vector mlp_forward(const MlpNetwork& net, const Vector& x) {
  return Vector(mlp_forward(net, Matrix(x)));
}

MlpTape mlp_forward_tape(const MlpNetwork& net, const Matrix& x) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("mlp_forward_tape: input dimension mismatch");
  MlpTape tape;
  tape.input = x;
  Matrix a = x;
  const int last = net.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Matrix pre = (net.weights[l] * a).colwise() + net.biases[l];
    tape.pre.push_back(pre);
    a = (l == last) ? pre : apply_activation(net, pre);
    tape.act.push_back(a);
  }
  return tape;
}

MlpGrads zero_grads(const MlpNetwork& net) {
  MlpGrads g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(
        Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

Vector MlpGrads::to_flat() const {
  long n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  Vector flat(n);
  long at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) =
        Eigen::Map<const Vector>(weights[l].data(), weights[l].size());
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

void MlpGrads::scale(Scalar s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

void MlpGrads::add(const MlpGrads& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
}

MlpBackwardResult mlp_backward(const MlpNetwork& net, const MlpTape& tape,
                               const Matrix& out_grad) {
  const int last = net.num_layers() - 1;
  if (out_grad.rows() != net.output_dim() ||
      out_grad.cols() != tape.input.cols())
    throw std::invalid_argument("mlp_backward: out_grad shape mismatch");

  MlpBackwardResult res;
  res.grads = zero_grads(net);
  Matrix delta = out_grad;  // output layer is linear
  for (int l = last; l >= 0; --l) {
    const Matrix& below = (l == 0) ? tape.input : tape.act[l - 1];
    res.grads.weights[l] = delta * below.transpose();
    res.grads.biases[l] = delta.rowwise().sum();
    Matrix back = net.weights[l].transpose() * delta;
    if (l == 0) {
      res.input_grad = back;
    } else {
      delta = back.cwiseProduct(
          activation_grad(net, tape.pre[l - 1], tape.act[l - 1]));
    }
  }
  return res;
}

// -------------------------------------------------------------- policy ----

void SnnPolicy::reset_state() {
  lif1.reset();
  lif2.reset();
}

Vector SnnPolicy::act(const Vector& obs) {
  if (obs.size() != obs_dim())
    throw std::invalid_argument("SnnPolicy::act: observation size mismatch");
  const Vector i1 = w_enc * obs + b_enc;
  LifStepResult r1 = lif_step(lif1.membrane, i1, beta, u_thr);
  lif1.membrane = r1.membrane;
  lif1.spikes = r1.spikes;
  const Vector i2 = w_hid * r1.spikes + b_hid;
  LifStepResult r2 = lif_step(lif2.membrane, i2, beta, u_thr);
  lif2.membrane = r2.membrane;
  lif2.spikes = r2.spikes;
  return w_dec * r2.spikes + b_dec;
}

long SnnPolicy::param_count() const {
  return w_enc.size() + b_enc.size() + w_hid.size() + b_hid.size() +
         w_dec.size() + b_dec.size();
}

Vector SnnPolicy::to_flat() const {
  Vector flat(param_count());
  long at = 0;
  auto put_m = [&](const Matrix& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  };
  auto put_v = [&](const Vector& v) {
    flat.segment(at, v.size()) = v;
    at += v.size();
  };
  put_m(w_enc);
  put_v(b_enc);
  put_m(w_hid);
  put_v(b_hid);
  put_m(w_dec);
  put_v(b_dec);
  return flat;
}

void SnnPolicy::from_flat(const Vector& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("SnnPolicy::from_flat: size mismatch");
  long at = 0;
  auto take_m = [&](Matrix& m) {
    Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
    at += m.size();
  };
  auto take_v = [&](Vector& v) {
    v = flat.segment(at, v.size());
    at += v.size();
  };
  take_m(w_enc);
  take_v(b_enc);
  take_m(w_hid);
  take_v(b_hid);
  take_m(w_dec);
  take_v(b_dec);
}

SnnPolicy make_snn_policy(int obs_dim, int h1, int h2, int act_dim,
                          RandomStream& rng, Scalar beta, Scalar u_thr) {
  SnnPolicy p;
  p.beta = beta;
  p.u_thr = u_thr;
  const Scalar b_enc = 1.0 / std::sqrt(static_cast<Scalar>(obs_dim));
  const Scalar b_hid = 1.0 / std::sqrt(static_cast<Scalar>(h1));
  const Scalar b_dec = 1.0 / std::sqrt(static_cast<Scalar>(h2));
  p.w_enc = uniform_matrix(h1, obs_dim, b_enc, rng);
  p.b_enc = uniform_vector(h1, b_enc, rng);
  p.w_hid = uniform_matrix(h2, h1, b_hid, rng);
  p.b_hid = uniform_vector(h2, b_hid, rng);
  p.w_dec = uniform_matrix(act_dim, h2, b_dec, rng);
  p.b_dec = uniform_vector(act_dim, b_dec, rng);
  p.lif1 = LifLayerState(h1);
  p.lif2 = LifLayerState(h2);
  return p;
}

SnnForwardResult snn_forward_sequence(const SnnPolicy& policy,
                                      const std::vector<Vector>& observations,
                                      ForwardMode mode, Scalar smooth_k,
                                      const LifLayerState* init1,
                                      const LifLayerState* init2) {
  SnnForwardResult res;
  res.tape.mode = mode;
  res.tape.k = (mode == ForwardMode::smooth) ? smooth_k : 0.0;
  const int T = static_cast<int>(observations.size());
  res.tape.obs.reserve(T);
  res.tape.x1.reserve(T);
  res.tape.s1.reserve(T);
  res.tape.x2.reserve(T);
  res.tape.s2.reserve(T);
  res.actions.reserve(T);

  Vector u1 = init1 ? init1->membrane : Vector::Zero(policy.hidden1());
  Vector u2 = init2 ? init2->membrane : Vector::Zero(policy.hidden2());
  if (u1.size() != policy.hidden1() || u2.size() != policy.hidden2())
    throw std::invalid_argument(
        "snn_forward_sequence: initial state size mismatch");

  for (int t = 0; t < T; ++t) {
    const Vector& obs = observations[t];
    if (obs.size() != policy.obs_dim())
      throw std::invalid_argument(
          "snn_forward_sequence: observation size mismatch");
    const Vector i1 = policy.w_enc * obs + policy.b_enc;
    LifStepResult r1 =
        (mode == ForwardMode::smooth)
            ? lif_step_smooth(u1, i1, policy.beta, policy.u_thr, smooth_k)
            : lif_step(u1, i1, policy.beta, policy.u_thr);
    const Vector i2 = policy.w_hid * r1.spikes + policy.b_hid;
    LifStepResult r2 =
        (mode == ForwardMode::smooth)
            ? lif_step_smooth(u2, i2, policy.beta, policy.u_thr, smooth_k)
            : lif_step(u2, i2, policy.beta, policy.u_thr);
    u1 = r1.membrane;
    u2 = r2.membrane;

    res.tape.obs.push_back(obs);
    res.tape.x1.push_back(r1.pre_membrane.array() - policy.u_thr);
    res.tape.s1.push_back(r1.spikes);
    res.tape.x2.push_back(r2.pre_membrane.array() - policy.u_thr);
    res.tape.s2.push_back(r2.spikes);
    res.actions.push_back(policy.w_dec * r2.spikes + policy.b_dec);
    if (mode == ForwardMode::spiking_surrogate) {
      res.spike_count1 += static_cast<long>(r1.spikes.sum());
      res.spike_count2 += static_cast<long>(r2.spikes.sum());
    }
  }
  res.final1.membrane = u1;
  res.final1.spikes = res.tape.s1.empty() ? Vector::Zero(policy.hidden1())
                                          : res.tape.s1.back();
  res.final2.membrane = u2;
  res.final2.spikes = res.tape.s2.empty() ? Vector::Zero(policy.hidden2())
                                          : res.tape.s2.back();
  return res;
}

SnnGrads zero_grads(const SnnPolicy& policy) {
  SnnGrads g;
  g.w_enc = Matrix::Zero(policy.w_enc.rows(), policy.w_enc.cols());
  g.b_enc = Vector::Zero(policy.b_enc.size());
  g.w_hid = Matrix::Zero(policy.w_hid.rows(), policy.w_hid.cols());
  g.b_hid = Vector::Zero(policy.b_hid.size());
  g.w_dec = Matrix::Zero(policy.w_dec.rows(), policy.w_dec.cols());
  g.b_dec = Vector::Zero(policy.b_dec.size());
  return g;
}

Vector SnnGrads::to_flat() const {
  Vector flat(w_enc.size() + b_enc.size() + w_hid.size() + b_hid.size() +
              w_dec.size() + b_dec.size());
  long at = 0;
  auto put_m = [&](const Matrix& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  };
  auto put_v = [&](const Vector& v) {
    flat.segment(at, v.size()) = v;
    at += v.size();
  };
  put_m(w_enc);
  put_v(b_enc);
  put_m(w_hid);
  put_v(b_hid);
  put_m(w_dec);
  put_v(b_dec);
  return flat;
}

void SnnGrads::scale(Scalar s) {
  w_enc *= s;
  b_enc *= s;
  w_hid *= s;
  b_hid *= s;
  w_dec *= s;
  b_dec *= s;
}

void SnnGrads::add(const SnnGrads& other) {
  w_enc += other.w_enc;
  b_enc += other.b_enc;
  w_hid += other.w_hid;
  b_hid += other.b_hid;
  w_dec += other.w_dec;
  b_dec += other.b_dec;
}

SnnGrads snn_backward_sequence(const SnnPolicy& policy,
                               const GradientTape& tape,
                               const std::vector<Vector>& output_grads,
                               const std::vector<std::uint8_t>& warm_up_mask,
                               Scalar k) {
  const int T = tape.length();
  if (static_cast<int>(output_grads.size()) != T ||
      static_cast<int>(warm_up_mask.size()) != T)
    throw std::invalid_argument(
        "snn_backward_sequence: grads/mask length mismatch");
  const bool smooth = tape.mode == ForwardMode::smooth;

  SnnGrads g = zero_grads(policy);
  Vector g_u1 = Vector::Zero(policy.hidden1());  // dL/dU1_t from step t+1
  Vector g_u2 = Vector::Zero(policy.hidden2());

  for (int t = T - 1; t >= 0; --t) {
    const Vector ga = warm_up_mask[t]
                          ? output_grads[t]
                          : Vector(Vector::Zero(policy.act_dim()));
    if (warm_up_mask[t]) {
      g.w_dec.noalias() += ga * tape.s2[t].transpose();
      g.b_dec += ga;
    }

    Vector gs2 = policy.w_dec.transpose() * ga;
    if (smooth) gs2 -= policy.u_thr * g_u2;  // reset path
    const Vector f2 = surrogate_grad(tape.x2[t].array(), k).matrix();
    const Vector gpre2 = g_u2 + gs2.cwiseProduct(f2);

    g.w_hid.noalias() += gpre2 * tape.s1[t].transpose();
    g.b_hid += gpre2;

    Vector gs1 = policy.w_hid.transpose() * gpre2;
    if (smooth) gs1 -= policy.u_thr * g_u1;
    const Vector f1 = surrogate_grad(tape.x1[t].array(), k).matrix();
    const Vector gpre1 = g_u1 + gs1.cwiseProduct(f1);

    g.w_enc.noalias() += gpre1 * tape.obs[t].transpose();
    g.b_enc += gpre1;

    g_u2 = policy.beta * gpre2;
    g_u1 = policy.beta * gpre1;
  }
  return g;
}

// ----------------------------------------------------------- utilities ----

void soft_update(MlpNetwork& target, const MlpNetwork& source, Scalar tau) {
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = tau * source.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * source.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

void soft_update(SnnPolicy& target, const SnnPolicy& source, Scalar tau) {
  target.w_enc = tau * source.w_enc + (1.0 - tau) * target.w_enc;
  target.b_enc = tau * source.b_enc + (1.0 - tau) * target.b_enc;
  target.w_hid = tau * source.w_hid + (1.0 - tau) * target.w_hid;
  target.b_hid = tau * source.b_hid + (1.0 - tau) * target.b_hid;
  target.w_dec = tau * source.w_dec + (1.0 - tau) * target.w_dec;
  target.b_dec = tau * source.b_dec + (1.0 - tau) * target.b_dec;
}

void Adam::step(Vector& params, const Vector& grads) {
  if (m.size() != params.size()) {
    m = Vector::Zero(params.size());
    v = Vector::Zero(params.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grads;
  v = beta2 * v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const Scalar c1 = 1.0 - std::pow(beta1, static_cast<Scalar>(t));
  const Scalar c2 = 1.0 - std::pow(beta2, static_cast<Scalar>(t));
  params.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace spikerl
