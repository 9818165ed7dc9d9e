#include "spikerl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace spikerl {

namespace {

using nlohmann::json;

json matrix_row_major(const Matrix& m) {
  std::vector<Scalar> flat;
  flat.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return json(flat);
}

Matrix matrix_from_row_major(const json& j, int rows, int cols) {
  if (static_cast<long>(j.size()) != static_cast<long>(rows) * cols)
    throw std::runtime_error("checkpoint: weight block size mismatch");
  Matrix m(rows, cols);
  long at = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[at++].get<Scalar>();
  return m;
}

Vector vector_from_json(const json& j, int n) {
  if (static_cast<int>(j.size()) != n)
    throw std::runtime_error("checkpoint: bias block size mismatch");
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = j[i].get<Scalar>();
  return v;
}

json load_and_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint: " + path + " is not valid JSON (" +
                             e.what() + ")");
  }
  if (!j.contains("version") || !j["version"].is_string())
    throw std::runtime_error("checkpoint: " + path + " has no version header");
  const std::string v = j["version"].get<std::string>();
  if (v != kCheckpointVersion)
    throw std::runtime_error("checkpoint: version mismatch in " + path +
                             " (found \"" + v + "\", expected \"" +
                             kCheckpointVersion + "\")");
  return j;
}

void write_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << j.dump(1) << '\n';
}

}  // namespace

void save_checkpoint(const std::string& path, const SnnPolicy& policy) {
  json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "snn";
  j["layer_sizes"] = {policy.obs_dim(), policy.hidden1(), policy.hidden2(),
                      policy.act_dim()};
  j["weights"] = {matrix_row_major(policy.w_enc),
                  matrix_row_major(policy.w_hid),
                  matrix_row_major(policy.w_dec)};
  j["biases"] = {std::vector<Scalar>(policy.b_enc.begin(), policy.b_enc.end()),
                 std::vector<Scalar>(policy.b_hid.begin(), policy.b_hid.end()),
                 std::vector<Scalar>(policy.b_dec.begin(), policy.b_dec.end())};
  j["beta"] = policy.beta;
  j["u_thr"] = policy.u_thr;
  j["k"] = policy.slope;
  write_file(path, j);
}

void save_checkpoint(const std::string& path, const MlpNetwork& net,
                     Scalar squash_scale) {
  json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = "mlp";
  j["layer_sizes"] = net.layer_sizes();
  json w = json::array(), b = json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    w.push_back(matrix_row_major(net.weights[l]));
    b.push_back(std::vector<Scalar>(net.biases[l].begin(), net.biases[l].end()));
  }
  j["weights"] = w;
  j["biases"] = b;
  j["activation"] =
      net.activation == Activation::rectifier ? "rectifier" : "smooth_sigmoid";
  j["squash_scale"] = squash_scale;
  write_file(path, j);
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
  json j = load_and_check(path);
  const std::string kind = j.value("kind", "");
  if (kind == "snn") return CheckpointKind::snn;
  if (kind == "mlp") return CheckpointKind::mlp;
  throw std::runtime_error("checkpoint: unknown kind \"" + kind + "\"");
}

SnnPolicy load_snn_checkpoint(const std::string& path) {
  json j = load_and_check(path);
  if (j.value("kind", "") != "snn")
    throw std::runtime_error("checkpoint: " + path + " is not a policy file");
  const std::vector<int> sizes = j["layer_sizes"].get<std::vector<int>>();
  if (sizes.size() != 4)
    throw std::runtime_error("checkpoint: policy needs 4 layer sizes");
  SnnPolicy p;
  p.w_enc = matrix_from_row_major(j["weights"][0], sizes[1], sizes[0]);
  p.w_hid = matrix_from_row_major(j["weights"][1], sizes[2], sizes[1]);
  p.w_dec = matrix_from_row_major(j["weights"][2], sizes[3], sizes[2]);
  p.b_enc = vector_from_json(j["biases"][0], sizes[1]);
  p.b_hid = vector_from_json(j["biases"][1], sizes[2]);
  p.b_dec = vector_from_json(j["biases"][2], sizes[3]);
  p.beta = j["beta"].get<Scalar>();
  p.u_thr = j["u_thr"].get<Scalar>();
  p.slope = j["k"].get<Scalar>();
  p.lif1 = LifLayerState(sizes[1]);
  p.lif2 = LifLayerState(sizes[2]);
  return p;
}

MlpNetwork load_mlp_checkpoint(const std::string& path, Scalar* squash_scale) {
  json j = load_and_check(path);
  if (j.value("kind", "") != "mlp")
    throw std::runtime_error("checkpoint: " + path + " is not an MLP file");
  const std::vector<int> sizes = j["layer_sizes"].get<std::vector<int>>();
  MlpNetwork net;
  net.activation = j.value("activation", "rectifier") == "smooth_sigmoid"
                       ? Activation::smooth_sigmoid
                       : Activation::rectifier;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.weights.push_back(
        matrix_from_row_major(j["weights"][l], sizes[l + 1], sizes[l]));
    net.biases.push_back(vector_from_json(j["biases"][l], sizes[l + 1]));
  }
  if (squash_scale) *squash_scale = j.value("squash_scale", 0.0);
  return net;
}

}  // namespace spikerl
