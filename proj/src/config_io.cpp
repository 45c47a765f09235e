#include "aggterm/config_io.hpp"

#include <fstream>
#include <sstream>

#include "aggterm/error.hpp"

namespace aggterm {

namespace {

template <class T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key);
}

void only_keys(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(std::string("unknown field '") + k + "' in " + what);
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Schedule schedule_from_json(const Json& j) {
  const auto kind = get<std::string>(j, "kind");
  if (kind == "dense") {
    only_keys(j, {"kind", "p"}, "dense schedule");
    return Schedule::dense(get<double>(j, "p"));
  }
  if (kind == "root") {
    only_keys(j, {"kind", "K", "beta"}, "root schedule");
    return Schedule::root(get<double>(j, "K"), get<double>(j, "beta"));
  }
  if (kind == "log") {
    only_keys(j, {"kind", "K"}, "log schedule");
    return Schedule::log(get<double>(j, "K"));
  }
  if (kind == "sparse") {
    only_keys(j, {"kind", "K"}, "sparse schedule");
    return Schedule::sparse(get<double>(j, "K"));
  }
  if (kind == "alternating") {
    only_keys(j, {"kind", "even", "odd"}, "alternating schedule");
    return Schedule::alternating(schedule_from_json(get<Json>(j, "even")),
                                 schedule_from_json(get<Json>(j, "odd")));
  }
  throw ConfigError("unknown schedule kind '" + kind + "' (dense, root, log, sparse, alternating)");
}

Json to_json(const Schedule& s) {
  return std::visit(
      [](const auto& r) -> Json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, schedule::Dense>) return {{"kind", "dense"}, {"p", r.p}};
        if constexpr (std::is_same_v<T, schedule::Root>) return {{"kind", "root"}, {"K", r.K}, {"beta", r.beta}};
        if constexpr (std::is_same_v<T, schedule::Log>) return {{"kind", "log"}, {"K", r.K}};
        if constexpr (std::is_same_v<T, schedule::Sparse>) return {{"kind", "sparse"}, {"K", r.K}};
        if constexpr (std::is_same_v<T, schedule::Alternating>)
          return {{"kind", "alternating"}, {"even", to_json(*r.even)}, {"odd", to_json(*r.odd)}};
      },
      s.rule);
}

GraphModelSpec model_from_json(const Json& j) {
  const auto kind = get<std::string>(j, "model");
  GraphModelSpec spec;
  if (kind == "er") {
    only_keys(j, {"model", "schedule", "features"}, "er model");
    spec.model = ErModel{schedule_from_json(get<Json>(j, "schedule"))};
  } else if (kind == "sbm") {
    only_keys(j, {"model", "fractions", "P", "features"}, "sbm model");
    const auto rows = get<std::vector<std::vector<double>>>(j, "P");
    Matrix P(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw ConfigError("P must be a square matrix");
      for (std::size_t k = 0; k < rows.size(); ++k) P(i, k) = rows[i][k];
    }
    spec.model = SbmModel{get<std::vector<double>>(j, "fractions"), P};
  } else if (kind == "ba") {
    only_keys(j, {"model", "m", "features"}, "ba model");
    spec.model = BaModel{get<int>(j, "m")};
  } else {
    throw ConfigError("unknown model '" + kind + "' (er, sbm, ba)");
  }
  spec.validate();
  return spec;
}

Json to_json(const GraphModelSpec& m) {
  if (const auto* er = std::get_if<ErModel>(&m.model)) return {{"model", "er"}, {"schedule", to_json(er->schedule)}};
  if (const auto* sbm = std::get_if<SbmModel>(&m.model)) {
    std::vector<std::vector<double>> rows(sbm->P.rows(), std::vector<double>(sbm->P.cols()));
    for (Eigen::Index i = 0; i < sbm->P.rows(); ++i)
      for (Eigen::Index k = 0; k < sbm->P.cols(); ++k) rows[i][k] = sbm->P(i, k);
    return {{"model", "sbm"}, {"fractions", sbm->fractions}, {"P", rows}};
  }
  return {{"model", "ba"}, {"m", std::get<BaModel>(m.model).m}};
}

FeatureDistSpec features_from_json(const Json& j) {
  const auto dist = get_or<std::string>(j, "dist", "uniform01");
  const int dim = get_or<int>(j, "dim", 1);
  FeatureDistSpec spec;
  if (dist == "uniform01") {
    only_keys(j, {"dist", "dim"}, "feature distribution");
    spec = FeatureDistSpec::uniform01(dim);
  } else if (dist == "uniform") {
    only_keys(j, {"dist", "dim", "a", "b"}, "feature distribution");
    spec = FeatureDistSpec::uniform(get<double>(j, "a"), get<double>(j, "b"), dim);
  } else if (dist == "bernoulli") {
    only_keys(j, {"dist", "dim", "q"}, "feature distribution");
    spec = FeatureDistSpec::bernoulli(get<double>(j, "q"), dim);
  } else if (dist == "constant") {
    only_keys(j, {"dist", "dim", "c"}, "feature distribution");
    spec = FeatureDistSpec::constant(get<double>(j, "c"), dim);
  } else {
    throw ConfigError("unknown feature distribution '" + dist + "' (uniform01, uniform, bernoulli, constant)");
  }
  spec.validate();
  return spec;
}

std::optional<FeatureDistSpec> model_features(const Json& model_doc) {
  if (!model_doc.is_object() || !model_doc.contains("features")) return std::nullopt;
  return features_from_json(model_doc.at("features"));
}

ArchConfig arch_from_json(const Json& j) {
  only_keys(j,
            {"kind", "layers", "hidden", "classes", "input_dim", "rw_length", "activation", "output", "skip",
             "global_readout", "seed"},
            "architecture");
  ArchConfig c;
  c.kind = arch_kind_from_string(get<std::string>(j, "kind"));
  c.layers = get_or<int>(j, "layers", c.layers);
  c.hidden = get_or<int>(j, "hidden", c.hidden);
  c.classes = get_or<int>(j, "classes", c.classes);
  c.input_dim = get_or<int>(j, "input_dim", c.input_dim);
  c.rw_length = get_or<int>(j, "rw_length", c.kind == ArchKind::GPS_RW ? 3 : 0);
  const auto act = get_or<std::string>(j, "activation", "relu");
  if (act == "relu") c.activation = Activation::Relu;
  else if (act == "sigmoid") c.activation = Activation::Sigmoid;
  else if (act == "identity") c.activation = Activation::Identity;
  else throw ConfigError("unknown activation '" + act + "' (relu, sigmoid, identity)");
  const auto output = get_or<std::string>(j, "output", "softmax");
  if (output == "softmax") c.output = OutputMap::Softmax;
  else if (output == "identity") c.output = OutputMap::Identity;
  else throw ConfigError("unknown output map '" + output + "' (softmax, identity)");
  for (const auto& pair : get_or<std::vector<std::vector<int>>>(j, "skip", {})) {
    if (pair.size() != 2) throw ConfigError("skip connections are [from, to] pairs");
    c.skip.emplace_back(pair[0], pair[1]);
  }
  c.global_readout = get_or<bool>(j, "global_readout", false);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.validate();
  return c;
}

Json to_json(const ArchConfig& c) {
  std::vector<std::vector<int>> skip;
  for (auto [a, b] : c.skip) skip.push_back({a, b});
  const char* act = c.activation == Activation::Relu ? "relu" : c.activation == Activation::Sigmoid ? "sigmoid" : "identity";
  return {{"kind", to_string(c.kind)},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"classes", c.classes},
          {"input_dim", c.input_dim},
          {"rw_length", c.rw_length},
          {"activation", act},
          {"output", c.output == OutputMap::Softmax ? "softmax" : "identity"},
          {"skip", skip},
          {"global_readout", c.global_readout},
          {"seed", c.seed}};
}

}  // namespace aggterm
