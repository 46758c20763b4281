#include "common.hpp"

#include "imface/diffcore/checkpoint.hpp"
#include "imface/error.hpp"

#include <fstream>

namespace imface::cli {

using diff::Tensor;

namespace {

diff::Var row_from(const nlohmann::json& j, const char* key, std::size_t dim, const std::string& where) {
  if (!j.contains(key) || !j[key].is_array()) throw Error(ErrorKind::data, where + ": missing '" + key + "' code");
  const auto& a = j[key];
  if (a.size() != dim)
    throw Error(ErrorKind::dimension, where + ": '" + key + "' has " + std::to_string(a.size()) + " entries, model expects " +
                                          std::to_string(dim));
  Tensor t(1, dim);
  for (std::size_t n = 0; n < dim; ++n) t(0, n) = a[n].get<double>();
  return diff::constant(std::move(t));
}

nlohmann::json row_json(const diff::Var& v) { return v.value().values(); }

}  // namespace

model::LatentCodes read_codes(const std::filesystem::path& path, const model::ModelConfig& c) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read codes " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  return {row_from(j, "exp", c.latent_exp, where), row_from(j, "id", c.latent_id, where),
          row_from(j, "detail", c.latent_detail, where)};
}

nlohmann::json codes_json(const model::LatentCodes& codes) {
  return {{"exp", row_json(codes.exp)}, {"id", row_json(codes.id)}, {"detail", row_json(codes.detail)}};
}

void write_codes(const std::filesystem::path& path, const model::LatentCodes& codes, nlohmann::json extra) {
  nlohmann::json j = codes_json(codes);
  if (extra.is_object()) j.update(extra);
  write_json_file(path, j);
}

diff::NamedTensors read_embeddings(const std::filesystem::path& model_dir) {
  return diff::read_tensors(model_dir / "embeddings.bin");
}

model::LatentCodes scan_codes(const diff::NamedTensors& emb, const std::string& scan_key) {
  const auto slash = scan_key.find('/');
  if (slash == std::string::npos) throw Error(ErrorKind::config, "scan key must look like identity/expression");
  auto get = [&](const std::string& name) {
    for (const auto& [n, t] : emb)
      if (n == name) return diff::constant(t);
    throw Error(ErrorKind::data, "no embedding '" + name + "' in the model");
  };
  return {get("emb.exp." + scan_key), get("emb.id." + scan_key.substr(0, slash)), get("emb.detail." + scan_key)};
}

model::LatentCodes mean_codes(const diff::NamedTensors& emb, const model::ModelConfig& c) {
  auto mean_of = [&](const std::string& prefix, std::size_t dim) {
    Tensor acc(1, dim);
    std::size_t n = 0;
    for (const auto& [name, t] : emb) {
      if (name.rfind(prefix, 0) != 0) continue;
      if (t.size() != dim) throw Error(ErrorKind::dimension, name + " does not match the model's code width");
      for (std::size_t i = 0; i < dim; ++i) acc(0, i) += t.values()[i];
      ++n;
    }
    for (auto& v : acc.values()) v /= double(std::max<std::size_t>(n, 1));
    return diff::constant(std::move(acc));
  };
  return {mean_of("emb.exp.", c.latent_exp), mean_of("emb.id.", c.latent_id),
          mean_of("emb.detail.", c.latent_detail)};
}

void write_snapshot(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& resolved) {
  write_json_file(dir / "run" / (command + ".json"), {{"command", command}, {"resolved", resolved}});
}

void ensure_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace imface::cli
