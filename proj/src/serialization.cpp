#include "chanest/serialization.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace chanest {

using nlohmann::json;

namespace {

template <typename Scalar>
json scalar_to_json(const Scalar& v) {
  if constexpr (is_complex_v<Scalar>) {
    return json::array({v.real(), v.imag()});
  } else {
    return json::array({v, 0.0});
  }
}

template <typename Scalar>
Scalar scalar_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw InvalidArgument("expected a [re, im] pair");
  }
  const double re = j[0].get<double>();
  const double im = j[1].get<double>();
  if constexpr (is_complex_v<Scalar>) {
    return Scalar(re, im);
  } else {
    if (im != 0.0) {
      throw InvalidArgument("complex value in a real-valued record");
    }
    return re;
  }
}

json dims_to_json(const SystemDims& d) {
  return json{{"n_r", d.n_r}, {"n_t", d.n_t}, {"t_blocks", d.t_blocks}};
}

SystemDims dims_from_json(const json& j) {
  SystemDims d{j.at("n_r").get<int>(), j.at("n_t").get<int>(), j.at("t_blocks").get<int>()};
  d.validate();
  return d;
}

json support_to_json(const Support& s) {
  json out = json::array();
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k)) {
      out.push_back(k);
    }
  }
  return out;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed JSON: ") + e.what());
  }
}

const char* scalar_name(bool complex) { return complex ? "complex" : "real"; }

}  // namespace

template <typename Scalar>
std::string channel_to_json(const VirtualChannel<Scalar>& channel) {
  json values = json::array();
  const std::vector<int> idx = channel.support_indices();
  for (int k : idx) {
    values.push_back(scalar_to_json(channel.values(k)));
  }
  const json j{{"dims", dims_to_json(channel.dims)},
               {"scalar", scalar_name(is_complex_v<Scalar>)},
               {"support", idx},
               {"values", values},
               {"sparsity", channel.sparsity},
               {"seed", channel.seed}};
  return j.dump(2);
}

template <typename Scalar>
VirtualChannel<Scalar> channel_from_json(const std::string& text) {
  const json j = parse(text);
  try {
    VirtualChannel<Scalar> ch;
    ch.dims = dims_from_json(j.at("dims"));
    const int n = ch.dims.n_coeffs();
    ch.values = Vec<Scalar>::Zero(n);
    ch.support = Support::Constant(n, false);
    const json& idx = j.at("support");
    const json& vals = j.at("values");
    if (idx.size() != vals.size()) {
      throw InvalidArgument("channel: support and values lengths differ");
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int pos = idx[k].get<int>();
      if (pos < 0 || pos >= n || ch.support(pos)) {
        throw InvalidArgument("channel: support index out of range or repeated");
      }
      ch.support(pos) = true;
      ch.values(pos) = scalar_from_json<Scalar>(vals[k]);
    }
    ch.sparsity = j.at("sparsity").get<int>();
    if (ch.sparsity != static_cast<int>(idx.size())) {
      throw InvalidArgument("channel: sparsity does not match the support size");
    }
    ch.seed = j.at("seed").get<std::uint64_t>();
    return ch;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("channel: ") + e.what());
  }
}

template <typename Scalar>
std::string training_to_json(const TrainingDesign<Scalar>& training) {
  json rows = json::array();
  for (Eigen::Index t = 0; t < training.s_block.rows(); ++t) {
    json row = json::array();
    for (Eigen::Index m = 0; m < training.s_block.cols(); ++m) {
      row.push_back(scalar_to_json(training.s_block(t, m)));
    }
    rows.push_back(row);
  }
  const json j{{"kind", to_string(training.kind)},
               {"scalar", scalar_name(is_complex_v<Scalar>)},
               {"seed", training.seed},
               {"t_blocks", training.t_blocks()},
               {"n_t", training.n_t()},
               {"entries", rows}};
  return j.dump(2);
}

template <typename Scalar>
TrainingDesign<Scalar> training_from_json(const std::string& text) {
  const json j = parse(text);
  try {
    TrainingDesign<Scalar> tr;
    tr.kind = training_kind_from_string(j.at("kind").get<std::string>());
    tr.seed = j.at("seed").get<std::uint64_t>();
    const int t_len = j.at("t_blocks").get<int>();
    const int n_t = j.at("n_t").get<int>();
    const json& rows = j.at("entries");
    if (t_len < 1 || n_t < 1 || rows.size() != static_cast<std::size_t>(t_len)) {
      throw InvalidArgument("training: entries do not match t_blocks");
    }
    tr.s_block.resize(t_len, n_t);
    for (int t = 0; t < t_len; ++t) {
      if (rows[t].size() != static_cast<std::size_t>(n_t)) {
        throw InvalidArgument("training: row length does not match n_t");
      }
      for (int m = 0; m < n_t; ++m) {
        tr.s_block(t, m) = scalar_from_json<Scalar>(rows[t][m]);
      }
    }
    return tr;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("training: ") + e.what());
  }
}

template <typename Scalar>
std::string result_to_json(const EstimationResult<Scalar>& result) {
  json values = json::array();
  for (Eigen::Index k = 0; k < result.support_hat.size(); ++k) {
    if (result.support_hat(k)) {
      values.push_back(scalar_to_json(result.h_v_hat(k)));
    }
  }
  const json j{{"support", support_to_json(result.support_hat)},
               {"values", values},
               {"nmse_trace", result.nmse_trace},
               {"iterations_run", result.iterations_run},
               {"fallback_count", result.fallback_count}};
  return j.dump(2);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

#define CHANEST_INSTANTIATE(S)                                                   \
  template std::string channel_to_json<S>(const VirtualChannel<S>&);             \
  template VirtualChannel<S> channel_from_json<S>(const std::string&);           \
  template std::string training_to_json<S>(const TrainingDesign<S>&);            \
  template TrainingDesign<S> training_from_json<S>(const std::string&);          \
  template std::string result_to_json<S>(const EstimationResult<S>&);

CHANEST_INSTANTIATE(double)
CHANEST_INSTANTIATE(Complex)

#undef CHANEST_INSTANTIATE

}  // namespace chanest
