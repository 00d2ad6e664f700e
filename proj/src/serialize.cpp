#include "expath/serialize.hpp"

#include <fstream>
#include <sstream>

namespace expath {

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"family", family_name(c.family)},
                     {"dim", c.dimension},
                     {"epochs", c.epochs},
                     {"lr", c.learning_rate},
                     {"neg", c.negatives},
                     {"batch", c.batch_size},
                     {"reg", c.regularization},
                     {"margin", c.margin},
                     {"seed", c.seed},
                     {"mimic_epochs", c.mimic_epochs},
                     {"mimic_lr_scale", c.mimic_lr_scale}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw InvalidArgument("model config must be a JSON object");
  try {
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("model")) c.family = parse_family(j.at("model").get<std::string>());
    if (j.contains("dim")) c.dimension = j.at("dim").get<std::uint32_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::uint32_t>();
    if (j.contains("lr")) c.learning_rate = j.at("lr").get<double>();
    if (j.contains("neg")) c.negatives = j.at("neg").get<std::uint32_t>();
    if (j.contains("batch")) c.batch_size = j.at("batch").get<std::uint32_t>();
    if (j.contains("reg")) c.regularization = j.at("reg").get<double>();
    if (j.contains("margin")) c.margin = j.at("margin").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mimic_epochs")) c.mimic_epochs = j.at("mimic_epochs").get<std::uint32_t>();
    if (j.contains("mimic_lr_scale")) c.mimic_lr_scale = j.at("mimic_lr_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model config: ") + e.what());
  }
}

nlohmann::json triple_json(const Triple& t) {
  return {{"h", t.head}, {"r", t.relation}, {"t", t.tail}};
}

Triple triple_from_json(const nlohmann::json& j) {
  try {
    return {j.at("h").get<std::string>(), j.at("r").get<std::string>(),
            j.at("t").get<std::string>()};
  } catch (const nlohmann::json::exception&) {
    throw ParseError("fact record must have string fields h, r, t: " + j.dump());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json fact_json(const KnowledgeGraph& kg, const Fact& f) {
  return triple_json(kg.labels(f));
}

Fact fact_from_json(const KnowledgeGraph& kg, const nlohmann::json& j) {
  const Triple t = triple_from_json(j);
  try {
    return kg.resolve(t);
  } catch (const LookupError& e) {
    throw LookupError(std::string(e.what()) + " in record " + j.dump());
  }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace expath
