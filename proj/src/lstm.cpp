#include "fluxcast/lstm.hpp"

#include <cstdio>
#include <ostream>

namespace fluxcast::lstm {

namespace {

nlohmann::json matrix_to_json(const Eigen::Ref<const Mat<double>>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::Ref<const Vec<double>>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < v.size(); ++r) out.push_back(v[r]);
  return out;
}

Mat<double> matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                             const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw IoError(std::string("model checkpoint: bad shape for ") + name);
  Mat<double> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw IoError(std::string("model checkpoint: bad shape for ") + name);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Vec<double> vector_from_json(const nlohmann::json& j, Eigen::Index n, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw IoError(std::string("model checkpoint: bad shape for ") + name);
  Vec<double> v(n);
  for (Eigen::Index r = 0; r < n; ++r) v[r] = j[static_cast<std::size_t>(r)].get<double>();
  return v;
}

}  // namespace

nlohmann::json params_to_json(const Params<double>& p) {
  return {{"input_dim", p.input_dim},
          {"hidden_dim", p.hidden_dim},
          {"output_dim", p.output_dim},
          {"w_f", matrix_to_json(p.w_f())},
          {"w_i", matrix_to_json(p.w_i())},
          {"w_g", matrix_to_json(p.w_g())},
          {"w_o", matrix_to_json(p.w_o())},
          {"b_f", vector_to_json(p.b_f())},
          {"b_i", vector_to_json(p.b_i())},
          {"b_g", vector_to_json(p.b_g())},
          {"b_o", vector_to_json(p.b_o())},
          {"w_y", matrix_to_json(p.w_y)},
          {"b_y", vector_to_json(p.b_y)}};
}

Params<double> params_from_json(const nlohmann::json& j) {
  const auto in = j.at("input_dim").get<Eigen::Index>();
  const auto hd = j.at("hidden_dim").get<Eigen::Index>();
  const auto out = j.at("output_dim").get<Eigen::Index>();
  if (in < 1 || hd < 1 || out < 1) throw IoError("model checkpoint: non-positive dimensions");
  Params<double> p = Params<double>::zeros(in, hd, out);
  p.w_f() = matrix_from_json(j.at("w_f"), hd, in + hd, "w_f");
  p.w_i() = matrix_from_json(j.at("w_i"), hd, in + hd, "w_i");
  p.w_g() = matrix_from_json(j.at("w_g"), hd, in + hd, "w_g");
  p.w_o() = matrix_from_json(j.at("w_o"), hd, in + hd, "w_o");
  p.b_f() = vector_from_json(j.at("b_f"), hd, "b_f");
  p.b_i() = vector_from_json(j.at("b_i"), hd, "b_i");
  p.b_g() = vector_from_json(j.at("b_g"), hd, "b_g");
  p.b_o() = vector_from_json(j.at("b_o"), hd, "b_o");
  p.w_y = matrix_from_json(j.at("w_y"), out, hd, "w_y");
  p.b_y = vector_from_json(j.at("b_y"), out, "b_y");
  return p;
}

void write_curve_csv(std::ostream& out, const TrainCurve& curve) {
  out << "epoch,train_rmse,val_rmse\n";
  char buf[96];
  for (std::size_t e = 0; e < curve.train_rmse.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, curve.train_rmse[e],
                  e < curve.val_rmse.size() ? curve.val_rmse[e] : 0.0);
    out << buf;
  }
}

}  // namespace fluxcast::lstm
