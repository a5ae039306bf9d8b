#include "config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace sqra::cli {
namespace {

using nlohmann::json;

std::string line_col(const std::string& text, std::size_t offset) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

class Reader {
 public:
  explicit Reader(const ConfigSource& source) : source_(source) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    std::string where = source_.name;
    const auto leaf = path.substr(path.find_last_of('.') + 1);
    const auto pos = source_.text.find("\"" + leaf + "\"");
    if (pos != std::string::npos) where += ":" + line_col(source_.text, pos);
    throw ValidationError(where + ": field '" + path + "': " + message);
  }

  const json& object(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing required field");
    const json& v = parent.at(key);
    if (!v.is_object()) fail(path, "expected an object");
    return v;
  }

  double number(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing required field");
    const json& v = parent.at(key);
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }

  long long integer(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing required field");
    const json& v = parent.at(key);
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
  }

  std::vector<int> int_list(const json& parent, const std::string& key, const std::string& path) const {
    if (!parent.contains(key)) fail(path, "missing required field");
    const json& v = parent.at(key);
    if (!v.is_array()) fail(path, "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(path, "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) const {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.contains(key)) fail(prefix.empty() ? key : prefix + "." + key, "unknown field");
    }
  }

 private:
  const ConfigSource& source_;
};

DegreeDistribution parse_degrees(const Reader& r, const json& v) {
  const std::string path = "uplink.degrees";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "aloha" || s == "x") return DegreeDistribution::aloha();
    std::string digits = s;
    if (digits.rfind("x^", 0) == 0) {
      digits = digits.substr(2);
    } else if (digits.rfind("x", 0) == 0) {
      digits = digits.substr(1);
    } else {
      r.fail(path, "expected \"aloha\", \"x^k\" or an object of probabilities");
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      r.fail(path, "expected \"aloha\", \"x^k\" or an object of probabilities");
    }
    return DegreeDistribution::regular(std::stoi(digits));
  }
  if (!v.is_object() || v.empty()) r.fail(path, "expected \"aloha\", \"x^k\" or an object of probabilities");
  std::map<int, double> probs;
  for (const auto& [key, p] : v.items()) {
    if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos || !p.is_number()) {
      r.fail(path, "entries must map a replica count to a probability");
    }
    probs[std::stoi(key)] = p.get<double>();
  }
  try {
    return DegreeDistribution(std::move(probs));
  } catch (const std::invalid_argument& e) {
    r.fail(path, e.what());
  }
}

IrsaConstants parse_irsa(const Reader& r, const json& v) {
  const std::string p = "uplink.irsa_constants";
  if (!v.is_object()) r.fail(p, "expected an object");
  r.only_keys(v, {"alpha", "nu", "beta0", "beta1", "nu_by_degree"}, p);
  IrsaConstants c;
  if (!v.contains("alpha") || !v.at("alpha").is_array() || v.at("alpha").size() != 4) {
    r.fail(p + ".alpha", "expected four numbers [alpha0, alpha1, alpha2, alpha3]");
  }
  for (const auto& a : v.at("alpha")) {
    if (!a.is_number()) r.fail(p + ".alpha", "expected four numbers");
  }
  c.alpha0 = v.at("alpha")[0].get<double>();
  c.alpha1 = v.at("alpha")[1].get<double>();
  c.alpha2 = v.at("alpha")[2].get<double>();
  c.alpha3 = v.at("alpha")[3].get<double>();
  c.nu = r.int_list(v, "nu", p + ".nu");
  c.beta0 = r.int_list(v, "beta0", p + ".beta0");
  c.beta1 = r.int_list(v, "beta1", p + ".beta1");
  if (v.contains("nu_by_degree")) {
    const json& list = v.at("nu_by_degree");
    if (!list.is_array()) r.fail(p + ".nu_by_degree", "expected an array of objects");
    for (const auto& profile : list) {
      if (!profile.is_object()) r.fail(p + ".nu_by_degree", "expected an array of objects");
      std::map<int, int> m;
      for (const auto& [key, count] : profile.items()) {
        if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos ||
            !count.is_number_integer()) {
          r.fail(p + ".nu_by_degree", "entries must map a replica count to an integer");
        }
        m[std::stoi(key)] = count.get<int>();
      }
      c.nu_by_degree.push_back(std::move(m));
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(p, e.what());
  }
  return c;
}

}  // namespace

ConfigSource parse_config_text(std::string text, std::string name) {
  ConfigSource source;
  source.name = std::move(name);
  source.text = std::move(text);
  try {
    source.json = json::parse(source.text);
  } catch (const json::parse_error& e) {
    const auto offset = e.byte > 0 ? e.byte - 1 : 0;
    throw ValidationError(source.name + ":" + line_col(source.text, offset) + ": invalid JSON: " + e.what());
  }
  if (!source.json.is_object()) throw ValidationError(source.name + ": top level must be a JSON object");
  return source;
}

ConfigSource read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

ExperimentConfig to_experiment_config(const ConfigSource& source) {
  const Reader r(source);
  const json& root = source.json;
  r.only_keys(root,
              {"model", "num_devices", "p_pos", "query_dim", "downlink", "uplink", "tau", "trials", "seed",
               "workers", "fusion", "metadata"},
              "");
  ExperimentConfig c;

  const json& model = r.object(root, "model", "model");
  r.only_keys(model, {"num_classes", "feature_dim", "target_gain"}, "model");
  c.num_classes = static_cast<int>(r.integer(model, "num_classes", "model.num_classes"));
  c.feature_dim = static_cast<int>(r.integer(model, "feature_dim", "model.feature_dim"));
  c.target_gain = r.number(model, "target_gain", "model.target_gain");

  c.num_devices = static_cast<int>(r.integer(root, "num_devices", "num_devices"));
  c.p_pos = r.number(root, "p_pos", "p_pos");
  c.query_dim = static_cast<int>(r.integer(root, "query_dim", "query_dim"));

  const json& dl = r.object(root, "downlink", "downlink");
  r.only_keys(dl, {"p_err", "rate", "snr_db", "snr"}, "downlink");
  if (dl.contains("p_err")) {
    if (dl.contains("rate")) r.fail("downlink.rate", "give either p_err or (rate, snr), not both");
    c.p_err_dl = r.number(dl, "p_err", "downlink.p_err");
  } else {
    const double rate = r.number(dl, "rate", "downlink.rate");
    double snr = 0.0;
    if (dl.contains("snr_db")) {
      snr = std::pow(10.0, r.number(dl, "snr_db", "downlink.snr_db") / 10.0);
    } else {
      snr = r.number(dl, "snr", "downlink.snr");
    }
    try {
      c.p_err_dl = downlink_outage(rate, snr);
    } catch (const std::domain_error& e) {
      r.fail("downlink", e.what());
    }
  }

  const json& ul = r.object(root, "uplink", "uplink");
  r.only_keys(ul, {"slots", "degrees", "irsa_constants"}, "uplink");
  c.slots = static_cast<int>(r.integer(ul, "slots", "uplink.slots"));
  if (!ul.contains("degrees")) r.fail("uplink.degrees", "missing required field");
  c.degrees = parse_degrees(r, ul.at("degrees"));
  if (ul.contains("irsa_constants")) c.irsa = parse_irsa(r, ul.at("irsa_constants"));

  if (root.contains("tau")) {
    const json& t = root.at("tau");
    if (t.is_string() && t.get<std::string>() == "auto") {
      c.tau.reset();
    } else if (t.is_number()) {
      c.tau = t.get<double>();
    } else {
      r.fail("tau", "expected a number in (0, 1] or \"auto\"");
    }
  }
  if (root.contains("trials")) c.trials = static_cast<int>(r.integer(root, "trials", "trials"));
  if (root.contains("seed")) {
    const long long seed = r.integer(root, "seed", "seed");
    if (seed < 0) r.fail("seed", "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
  }
  if (root.contains("workers")) c.workers = static_cast<int>(r.integer(root, "workers", "workers"));
  if (root.contains("fusion")) {
    const json& f = root.at("fusion");
    const std::string name = f.is_string() ? f.get<std::string>() : "";
    if (name == "relevancy") {
      c.fusion = FusionWeight::relevancy;
    } else if (name == "matching_score") {
      c.fusion = FusionWeight::matching_score;
    } else {
      r.fail("fusion", "expected \"relevancy\" or \"matching_score\"");
    }
  }
  if (root.contains("metadata") && !root.at("metadata").is_object()) r.fail("metadata", "expected an object");

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    const std::string field = colon == std::string::npos ? "config" : what.substr(0, colon);
    const std::string message = colon == std::string::npos ? what : what.substr(colon + 2);
    static const std::map<std::string, std::string> paths = {
        {"num_classes", "model.num_classes"}, {"feature_dim", "model.feature_dim"},
        {"target_gain", "model.target_gain"}, {"p_err_dl", "downlink"},
        {"slots", "uplink.slots"},           {"degrees", "uplink.degrees"},
        {"irsa", "uplink.irsa_constants"}};
    const auto it = paths.find(field);
    r.fail(it == paths.end() ? field : it->second, message);
  }
  return c;
}

std::uint64_t config_hash(const nlohmann::json& config) {
  // nlohmann objects are key-ordered maps, so dump() is already canonical
  const std::string canonical = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

}  // namespace sqra::cli
