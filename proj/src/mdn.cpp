#include "bounce/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "bounce/stats.hpp"

namespace bounce::mdn {

namespace {

struct ForwardPass {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = standardized input, then post-tanh layers
  Eigen::MatrixXd out;                // raw head outputs, B x output_dim
};

Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& std) {
  return (X.rowwise() - mean.transpose()).array().rowwise() /
         std.transpose().array();
}

ForwardPass run_forward(const MdnModel& m, const Eigen::MatrixXd& X) {
  ForwardPass f;
  f.acts.reserve(m.weights.size());
  f.acts.push_back(standardize_rows(X, m.x_mean, m.x_std));
  const int last = m.layer_count() - 1;
  for (int l = 0; l < last; ++l) {
    Eigen::MatrixXd z = f.acts.back() * m.weights[l].transpose();
    z.rowwise() += m.biases[l].transpose();
    f.acts.push_back(z.array().tanh().matrix());
  }
  f.out = f.acts.back() * m.weights[last].transpose();
  f.out.rowwise() += m.biases[last].transpose();
  return f;
}

}  // namespace

bool MdnModel::in_training_range(const Eigen::VectorXd& x) const {
  if (x_min.size() != x.size()) return true;
  return (x.array() >= x_min.array()).all() && (x.array() <= x_max.array()).all();
}

MixtureOfGaussians mdn_forward(const MdnModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.input_dim)
    throw std::invalid_argument("mdn_forward: input dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("mdn_forward: non-finite input");
  const ForwardPass f = run_forward(m, x.transpose());
  const int K = m.n_components, D = m.target_dim;

  MixtureOfGaussians mix;
  mix.weights.resize(K);
  mix.means.resize(K, D);
  mix.variances.resize(K, D);

  const Eigen::VectorXd logits = f.out.row(0).head(K);
  const double mx = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - mx).exp();
  mix.weights = w / w.sum();

  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < D; ++d) {
      const double mu_s = f.out(0, K + k * D + d);
      const double lv = f.out(0, K + K * D + k * D + d);
      mix.means(k, d) = mu_s * m.t_std[d] + m.t_mean[d];
      mix.variances(k, d) =
          std::exp(lv) * m.t_std[d] * m.t_std[d] + m.variance_floor;
    }
  }
  return mix;
}

double nll_loss(const MdnModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T,
                MdnGradients* grads) {
  const int B = static_cast<int>(X.rows());
  if (B == 0) throw std::invalid_argument("nll_loss: empty batch");
  if (X.cols() != m.input_dim || T.cols() != m.target_dim || T.rows() != B)
    throw std::invalid_argument("nll_loss: shape mismatch");

  const int K = m.n_components, D = m.target_dim;
  const ForwardPass f = run_forward(m, X);
  const Eigen::MatrixXd Ts = standardize_rows(T, m.t_mean, m.t_std);

  // Per-component floor in standardized units; keeps original-unit variances
  // >= variance_floor while the gradient flows through exp(lv) only.
  Eigen::ArrayXd floor_std =
      m.variance_floor / (m.t_std.array() * m.t_std.array());

  // log-weights via row-wise log-softmax
  const Eigen::MatrixXd logits = f.out.leftCols(K);
  const Eigen::VectorXd lmax = logits.rowwise().maxCoeff();
  const Eigen::MatrixXd shifted = logits.colwise() - lmax;
  const Eigen::VectorXd lse =
      shifted.array().exp().rowwise().sum().log().matrix() + lmax;
  const Eigen::MatrixXd logw = logits.colwise() - lse;

  Eigen::MatrixXd a(B, K);  // log w_k + log N_k
  std::vector<Eigen::MatrixXd> var_k(K), diff_k(K), expv_k(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd mu = f.out.middleCols(K + k * D, D);
    const Eigen::MatrixXd lv = f.out.middleCols(K + K * D + k * D, D);
    expv_k[k] = lv.array().exp().matrix();
    var_k[k] = (expv_k[k].array().rowwise() + floor_std.transpose()).matrix();
    diff_k[k] = Ts - mu;
    const Eigen::ArrayXXd v = var_k[k].array();
    const Eigen::ArrayXXd r2 = diff_k[k].array().square();
    a.col(k) = logw.col(k).array() -
               0.5 * (r2 / v + v.log() + std::log(2.0 * kPi)).rowwise().sum();
  }

  const Eigen::VectorXd amax = a.rowwise().maxCoeff();
  const Eigen::MatrixXd ea = (a.colwise() - amax).array().exp().matrix();
  const Eigen::VectorXd sum_ea = ea.rowwise().sum();
  const double std_nll = -(sum_ea.array().log() + amax.array()).mean();
  const double nll = std_nll + m.t_std.array().log().sum();

  if (grads == nullptr) return nll;

  // responsibilities
  const Eigen::MatrixXd resp = ea.array().colwise() / sum_ea.array();

  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(B, f.out.cols());
  // d(mean nll)/d logits = (softmax(logits) - resp) / B
  const Eigen::MatrixXd w = logw.array().exp().matrix();
  dout.leftCols(K) = (w - resp) / double(B);
  for (int k = 0; k < K; ++k) {
    const Eigen::ArrayXXd v = var_k[k].array();
    const Eigen::ArrayXXd diff = diff_k[k].array();
    const Eigen::ArrayXd r = resp.col(k).array();
    // means
    dout.middleCols(K + k * D, D) =
        ((-diff / v).colwise() * r).matrix() / double(B);
    // log-variances through var = exp(lv) + floor
    const Eigen::ArrayXXd dlogn_dvar = -0.5 / v + 0.5 * diff.square() / (v * v);
    dout.middleCols(K + K * D + k * D, D) =
        ((-dlogn_dvar * expv_k[k].array()).colwise() * r).matrix() / double(B);
  }

  // Backprop through the MLP.
  grads->weights.assign(m.weights.size(), {});
  grads->biases.assign(m.biases.size(), {});
  Eigen::MatrixXd delta = dout;
  for (int l = m.layer_count() - 1; l >= 0; --l) {
    grads->weights[l] = delta.transpose() * f.acts[l];
    grads->biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * m.weights[l]).array() *
              (1.0 - f.acts[l].array().square());
    }
  }
  return nll;
}

namespace {

MdnModel init_model(int input_dim, int target_dim, const MdnConfig& cfg, Rng& rng) {
  MdnModel m;
  m.input_dim = input_dim;
  m.target_dim = target_dim;
  m.n_components = cfg.n_components;
  m.variance_floor = cfg.variance_floor;

  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : cfg.hidden_sizes) dims.push_back(h);
  dims.push_back(m.output_dim());
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double s = std::sqrt(6.0 / double(fan_in + fan_out));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) W(i, j) = rng.uniform(-s, s);
    m.weights.push_back(std::move(W));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  m.x_mean = Eigen::VectorXd::Zero(input_dim);
  m.x_std = Eigen::VectorXd::Ones(input_dim);
  m.t_mean = Eigen::VectorXd::Zero(target_dim);
  m.t_std = Eigen::VectorXd::Ones(target_dim);
  return m;
}

void fit_normalization(MdnModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T) {
  const auto stats = [](const Eigen::MatrixXd& A, Eigen::VectorXd& mean,
                        Eigen::VectorXd& std, double floor) {
    mean = A.colwise().mean();
    const Eigen::MatrixXd c = A.rowwise() - mean.transpose();
    std = (c.array().square().colwise().mean()).sqrt().matrix();
    std = std.cwiseMax(floor);
  };
  stats(X, m.x_mean, m.x_std, 1e-8);
  stats(T, m.t_mean, m.t_std, 1e-8);
  m.x_min = X.colwise().minCoeff();
  m.x_max = X.colwise().maxCoeff();
}

}  // namespace

TrainResult train_mdn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& T,
                      const MdnConfig& cfg) {
  const int N = static_cast<int>(X.rows());
  if (N < cfg.batch_size)
    throw std::invalid_argument("train_mdn: dataset smaller than batch size");
  if (T.rows() != N) throw std::invalid_argument("train_mdn: X/T row mismatch");

  Rng rng(cfg.seed);
  MdnModel model = init_model(static_cast<int>(X.cols()), static_cast<int>(T.cols()), cfg, rng);
  fit_normalization(model, X, T);

  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (int l = 0; l < model.layer_count(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }

  TrainResult result;
  result.epoch_nll.reserve(cfg.epochs + 1);
  result.epoch_nll.push_back(nll_loss(model, X, T));

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  MdnGradients grads;
  Eigen::MatrixXd bx, bt;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int i = N - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < N; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, N - start);
      bx.resize(b, X.cols());
      bt.resize(b, T.cols());
      for (int i = 0; i < b; ++i) {
        bx.row(i) = X.row(order[start + i]);
        bt.row(i) = T.row(order[start + i]);
      }
      nll_loss(model, bx, bt, &grads);
      for (int l = 0; l < model.layer_count(); ++l) {
        vel_w[l] = cfg.momentum * vel_w[l] - cfg.learning_rate * grads.weights[l];
        vel_b[l] = cfg.momentum * vel_b[l] - cfg.learning_rate * grads.biases[l];
        model.weights[l] += vel_w[l];
        model.biases[l] += vel_b[l];
      }
    }
    const double epoch_nll = nll_loss(model, X, T);
    if (!std::isfinite(epoch_nll)) throw TrainingDivergedError(epoch);
    result.epoch_nll.push_back(epoch_nll);
  }
  result.model = std::move(model);
  return result;
}

Eigen::VectorXd flatten_params(const MdnModel& m) {
  std::ptrdiff_t total = 0;
  for (std::size_t l = 0; l < m.weights.size(); ++l)
    total += m.weights[l].size() + m.biases[l].size();
  Eigen::VectorXd flat(total);
  std::ptrdiff_t pos = 0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (int i = 0; i < m.weights[l].rows(); ++i)
      for (int j = 0; j < m.weights[l].cols(); ++j) flat[pos++] = m.weights[l](i, j);
    for (int i = 0; i < m.biases[l].size(); ++i) flat[pos++] = m.biases[l][i];
  }
  return flat;
}

void set_params(MdnModel& m, const Eigen::VectorXd& flat) {
  std::ptrdiff_t pos = 0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (int i = 0; i < m.weights[l].rows(); ++i)
      for (int j = 0; j < m.weights[l].cols(); ++j) m.weights[l](i, j) = flat[pos++];
    for (int i = 0; i < m.biases[l].size(); ++i) m.biases[l][i] = flat[pos++];
  }
  if (pos != flat.size()) throw std::invalid_argument("set_params: size mismatch");
}

Eigen::VectorXd flatten_grads(const MdnGradients& g) {
  std::ptrdiff_t total = 0;
  for (std::size_t l = 0; l < g.weights.size(); ++l)
    total += g.weights[l].size() + g.biases[l].size();
  Eigen::VectorXd flat(total);
  std::ptrdiff_t pos = 0;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    for (int i = 0; i < g.weights[l].rows(); ++i)
      for (int j = 0; j < g.weights[l].cols(); ++j) flat[pos++] = g.weights[l](i, j);
    for (int i = 0; i < g.biases[l].size(); ++i) flat[pos++] = g.biases[l][i];
  }
  return flat;
}

namespace {
nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
}
}  // namespace

std::string to_json(const MdnModel& m) {
  nlohmann::json j;
  j["input_dim"] = m.input_dim;
  j["target_dim"] = m.target_dim;
  j["n_components"] = m.n_components;
  j["variance_floor"] = m.variance_floor;
  std::vector<int> layer_sizes;
  for (const auto& W : m.weights) layer_sizes.push_back(static_cast<int>(W.rows()));
  j["layer_sizes"] = layer_sizes;
  j["params"] = vec_to_json(flatten_params(m));
  j["x_mean"] = vec_to_json(m.x_mean);
  j["x_std"] = vec_to_json(m.x_std);
  j["t_mean"] = vec_to_json(m.t_mean);
  j["t_std"] = vec_to_json(m.t_std);
  j["x_min"] = vec_to_json(m.x_min);
  j["x_max"] = vec_to_json(m.x_max);
  return j.dump(2);
}

MdnModel mdn_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MdnModel m;
  m.input_dim = j.at("input_dim").get<int>();
  m.target_dim = j.at("target_dim").get<int>();
  m.n_components = j.at("n_components").get<int>();
  m.variance_floor = j.at("variance_floor").get<double>();
  const auto layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  int in = m.input_dim;
  for (int out : layer_sizes) {
    m.weights.emplace_back(Eigen::MatrixXd::Zero(out, in));
    m.biases.emplace_back(Eigen::VectorXd::Zero(out));
    in = out;
  }
  set_params(m, vec_from_json(j.at("params")));
  m.x_mean = vec_from_json(j.at("x_mean"));
  m.x_std = vec_from_json(j.at("x_std"));
  m.t_mean = vec_from_json(j.at("t_mean"));
  m.t_std = vec_from_json(j.at("t_std"));
  m.x_min = vec_from_json(j.at("x_min"));
  m.x_max = vec_from_json(j.at("x_max"));
  return m;
}

void save_mdn(const MdnModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mdn: cannot open " + path);
  out << to_json(m) << "\n";
}

MdnModel load_mdn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mdn: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return mdn_from_json(text);
}

}  // namespace bounce::mdn
