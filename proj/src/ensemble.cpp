#include "devo/ensemble.hpp"

#include <nlohmann/json.hpp>

namespace devo {

void BoostConfig::validate() const {
  require(estimators >= 1, ErrorKind::ConfigError, "boosting needs at least one estimator");
}

double samme_alpha(double error, std::size_t classes) {
  require(classes >= 2, ErrorKind::ConfigError, "SAMME needs at least two classes");
  require(error >= 0.0 && error <= 1.0, ErrorKind::ConfigError, "stage error must lie in [0,1]");
  if (error <= 0.0) return kAlphaCap;
  return std::min(kAlphaCap, std::log((1.0 - error) / error) + std::log(static_cast<double>(classes - 1)));
}

int weighted_vote(std::span<const int> predictions, std::span<const double> alphas, std::size_t classes) {
  require(predictions.size() == alphas.size() && !predictions.empty(), ErrorKind::ShapeError,
          "vote needs one alpha per prediction");
  std::vector<double> tally(classes, 0.0);
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    require(predictions[t] >= 0 && static_cast<std::size_t>(predictions[t]) < classes, ErrorKind::ShapeError,
            "member predicted a class outside the ensemble's label set");
    tally[static_cast<std::size_t>(predictions[t])] += alphas[t];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (tally[c] > tally[best]) best = c;
  return static_cast<int>(best);
}

std::string ensemble_to_json(const EnsembleDocument& doc) {
  nlohmann::json out;
  out["format"] = "devo-model";
  out["version"] = 1;
  out["kind"] = "ensemble";
  out["scheme"] = "samme";
  out["member_kind"] = doc.member_kind;
  out["alphas"] = doc.alphas;
  out["class_names"] = doc.class_names;
  out["estimators"] = doc.estimators;
  auto members = nlohmann::json::array();
  for (const auto& m : doc.members) members.push_back(nlohmann::json::parse(m));
  out["members"] = members;
  return out.dump();
}

EnsembleDocument ensemble_from_json(const std::string& text) {
  nlohmann::json in;
  try {
    in = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("ensemble JSON: ") + e.what());
  }
  require(in.value("format", "") == "devo-model" && in.value("kind", "") == "ensemble" &&
              in.value("scheme", "") == "samme",
          ErrorKind::SchemaError, "not a SAMME ensemble container");
  try {
    EnsembleDocument doc;
    doc.member_kind = in.at("member_kind").get<std::string>();
    doc.alphas = in.at("alphas").get<std::vector<double>>();
    doc.class_names = in.at("class_names").get<std::vector<std::string>>();
    doc.estimators = in.at("estimators").get<std::size_t>();
    for (const auto& m : in.at("members")) doc.members.push_back(m.dump());
    require(doc.members.size() == doc.alphas.size() && !doc.members.empty(), ErrorKind::SchemaError,
            "ensemble needs one alpha per member");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, std::string("ensemble JSON: ") + e.what());
  }
}

}  // namespace devo
