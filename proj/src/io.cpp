#include "polyenergy/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace polyenergy {

static_assert(std::endian::native == std::endian::little,
              "file payloads are little-endian; big-endian hosts are unsupported");

namespace {

using nlohmann::json;

constexpr const char* kFileVersion = "0.1.0";
constexpr const char* kOrderingTag = "kron-first-slowest";

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::uint8_t* p, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const std::uint32_t v = (std::uint32_t(p[i]) << 16) | (std::uint32_t(p[i + 1]) << 8) |
                            std::uint32_t(p[i + 2]);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
  }
  if (i < len) {
    std::uint32_t v = std::uint32_t(p[i]) << 16;
    if (i + 1 < len) v |= std::uint32_t(p[i + 1]) << 8;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64Alphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> b64_decode(const std::string& s) {
  std::array<std::int8_t, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[std::uint8_t(kB64Alphabet[i])] = std::int8_t(i);
  if (s.size() % 4 != 0) throw IoError("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = s[i + j];
      if (c == '=') {
        if (i + 4 != s.size() || j < 2) throw IoError("base64 padding in the wrong place");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0 || lut[std::uint8_t(c)] < 0) throw IoError("invalid base64 character");
      v = (v << 6) | std::uint32_t(lut[std::uint8_t(c)]);
    }
    out.push_back(std::uint8_t((v >> 16) & 0xff));
    if (pad < 2) out.push_back(std::uint8_t((v >> 8) & 0xff));
    if (pad < 1) out.push_back(std::uint8_t(v & 0xff));
  }
  return out;
}

// Serializes numeric blocks, inlining small ones as base64 and spilling large
// ones to "<json name>.bin" with byte offsets recorded in the JSON.
class PayloadSink {
 public:
  PayloadSink(std::filesystem::path json_path, std::int64_t threshold)
      : threshold_(threshold), sidecar_path_(json_path.concat(".bin")) {}

  json f64(const double* p, std::int64_t count) { return blob(p, count, 8, "f64"); }
  json i64(const std::int64_t* p, std::int64_t count) { return blob(p, count, 8, "i64"); }

  bool used() const { return used_; }
  std::string sidecar_name() const { return sidecar_path_.filename().string(); }

  void finish() {
    if (stream_.is_open()) {
      stream_.close();
      if (!stream_) throw IoError("failed writing sidecar " + sidecar_path_.string());
    }
    if (!used_) {
      // Do not leave a stale spill file from an earlier save lying around.
      std::error_code ec;
      std::filesystem::remove(sidecar_path_, ec);
    }
  }

 private:
  json blob(const void* p, std::int64_t count, std::int64_t width, const char* dtype) {
    const std::int64_t bytes = count * width;
    json j{{"dtype", dtype}, {"count", count}};
    if (bytes <= threshold_) {
      j["encoding"] = "base64";
      j["data"] = b64_encode(static_cast<const std::uint8_t*>(p), std::size_t(bytes));
      return j;
    }
    if (!stream_.is_open()) {
      stream_.open(sidecar_path_, std::ios::binary | std::ios::trunc);
      if (!stream_) throw IoError("cannot open sidecar " + sidecar_path_.string());
      used_ = true;
      offset_ = 0;
    }
    j["encoding"] = "sidecar";
    j["offset"] = offset_;
    stream_.write(static_cast<const char*>(p), bytes);
    if (!stream_) throw IoError("failed writing sidecar " + sidecar_path_.string());
    offset_ += bytes;
    return j;
  }

  std::int64_t threshold_ = 0;
  std::int64_t offset_ = 0;
  bool used_ = false;
  std::filesystem::path sidecar_path_;
  std::ofstream stream_;
};

class PayloadSource {
 public:
  PayloadSource(const std::filesystem::path& json_path, const json& root)
      : dir_(json_path.parent_path()) {
    if (root.contains("sidecar")) sidecar_ = root.at("sidecar").get<std::string>();
  }

  Vector f64(const json& j, std::int64_t expect_count) {
    Vector out(expect_count);
    fill(j, "f64", out.data(), expect_count, 8);
    return out;
  }

  std::vector<std::int64_t> i64(const json& j, std::int64_t expect_count) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(expect_count));
    fill(j, "i64", out.data(), expect_count, 8);
    return out;
  }

 private:
  void fill(const json& j, const char* dtype, void* dst, std::int64_t count,
            std::int64_t width) {
    if (j.at("dtype").get<std::string>() != dtype)
      throw IoError("payload dtype mismatch (expected " + std::string(dtype) + ")");
    if (j.at("count").get<std::int64_t>() != count)
      throw IoError("payload element count mismatch");
    const std::int64_t bytes = count * width;
    const std::string enc = j.at("encoding").get<std::string>();
    if (enc == "base64") {
      const auto raw = b64_decode(j.at("data").get<std::string>());
      if (std::int64_t(raw.size()) != bytes) throw IoError("base64 payload size mismatch");
      std::memcpy(dst, raw.data(), std::size_t(bytes));
      return;
    }
    if (enc != "sidecar") throw IoError("unknown payload encoding '" + enc + "'");
    if (sidecar_.empty()) throw IoError("sidecar payload but no sidecar file is declared");
    if (!stream_.is_open()) {
      stream_.open(dir_ / sidecar_, std::ios::binary);
      if (!stream_) throw IoError("cannot open sidecar " + (dir_ / sidecar_).string());
    }
    stream_.seekg(j.at("offset").get<std::int64_t>());
    stream_.read(static_cast<char*>(dst), bytes);
    if (!stream_) throw IoError("sidecar read failed (truncated file?)");
  }

  std::filesystem::path dir_;
  std::string sidecar_;
  std::ifstream stream_;
};

json parse_file(const std::filesystem::path& file, const char* expected_format) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  try {
    if (root.at("format").get<std::string>() != expected_format)
      throw IoError(file.string() + ": not a " + std::string(expected_format) + " file");
    if (root.at("version").get<std::string>() != kFileVersion)
      throw IoError(file.string() + ": unsupported file version");
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  return root;
}

void write_json(const json& root, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << root.dump(1, '\t') << '\n';
  if (!out) throw IoError("failed writing " + file.string());
}

json matrix_blob(PayloadSink& sink, const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", sink.f64(m.data(), m.size())}};
}

Matrix read_matrix(PayloadSource& src, const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  if (rows < 0 || cols < 0) throw IoError("negative matrix dimension");
  const Vector flat = src.f64(j.at("values"), rows * cols);
  return Eigen::Map<const Matrix>(flat.data(), rows, cols);
}

}  // namespace

void save_energy(const EnergyPoly& energy, const std::filesystem::path& file,
                 const SaveOptions& opts) {
  energy.validate();
  PayloadSink sink(file, opts.sidecar_threshold_bytes);
  json coeffs = json::array();
  for (const KCoeff& c : energy.coeffs) {
    coeffs.push_back(json{{"order", c.order},
                          {"symmetric", c.symmetric},
                          {"values", sink.f64(c.data.data(), c.data.size())}});
  }
  json root{{"format", "polyenergy-energy"},
            {"version", kFileVersion},
            {"ordering", kOrderingTag},
            {"kind", to_string(energy.kind)},
            {"eta", energy.eta},
            {"state_dim", energy.n},
            {"degree", energy.degree},
            {"coefficients", std::move(coeffs)}};
  sink.finish();
  if (sink.used()) root["sidecar"] = sink.sidecar_name();
  write_json(root, file);
}

EnergyPoly load_energy(const std::filesystem::path& file) {
  const json root = parse_file(file, "polyenergy-energy");
  try {
    if (root.at("ordering").get<std::string>() != kOrderingTag)
      throw IoError(file.string() + ": unknown multi-index ordering tag");
    PayloadSource src(file, root);
    EnergyPoly energy;
    const std::string kind = root.at("kind").get<std::string>();
    if (kind == "past")
      energy.kind = EnergyKind::Past;
    else if (kind == "future")
      energy.kind = EnergyKind::Future;
    else
      throw IoError(file.string() + ": unknown energy kind '" + kind + "'");
    energy.eta = root.at("eta").get<double>();
    energy.n = root.at("state_dim").get<Index>();
    energy.degree = root.at("degree").get<int>();
    if (energy.n < 1 || energy.degree < 2)
      throw IoError(file.string() + ": invalid dimensions");
    for (const json& cj : root.at("coefficients")) {
      const int order = cj.at("order").get<int>();
      if (order != int(energy.coeffs.size()) + 2)
        throw IoError(file.string() + ": coefficient orders must run 2..degree");
      const std::int64_t len = ipow(energy.n, order);
      Vector values = src.f64(cj.at("values"), len);
      if (!values.allFinite()) throw IoError(file.string() + ": non-finite coefficient");
      energy.coeffs.emplace_back(order, energy.n, std::move(values),
                                 cj.at("symmetric").get<bool>());
    }
    energy.validate();
    for (const KCoeff& c : energy.coeffs) {
      if (c.symmetric && !is_symmetric(c, 64, 0x706f6c79u))
        throw IoError(file.string() + ": coefficient marked symmetric fails spot checks");
    }
    return energy;
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void save_model(const AssembledModel& model, const std::filesystem::path& file,
                const SaveOptions& opts) {
  model.sys.validate();
  const HeatModelConfig& cfg = model.config;
  PayloadSink sink(file, opts.sidecar_threshold_bytes);
  json root{{"format", "polyenergy-model"},
            {"version", kFileVersion},
            {"model", "heat-fem"},
            {"config",
             {{"elements", cfg.elements},
              {"length", cfg.length},
              {"inputs", cfg.inputs},
              {"outputs", cfg.outputs},
              {"reaction", cfg.reaction},
              {"convection", cfg.convection},
              {"cubic", cfg.cubic},
              {"lumped_mass", cfg.lumped_mass},
              {"initial_amplitude", cfg.initial_amplitude}}},
            {"state_dim", model.sys.n()},
            {"mesh_width", model.mesh_width}};
  root["matrices"] = json{{"a", matrix_blob(sink, model.sys.A)},
                          {"b", matrix_blob(sink, model.sys.B)},
                          {"c", matrix_blob(sink, model.sys.C)},
                          {"mass", matrix_blob(sink, model.mass)}};
  root["x0"] = sink.f64(model.x0.data(), model.x0.size());

  if (auto it = model.sys.drift.find(3); it != model.sys.drift.end()) {
    const SparseTensor* G = it->second.sparse_gram();
    if (G == nullptr) throw IoError("heat model drift is not in factored sparse form");
    if (!G->isCompressed()) throw IoError("cubic tensor is not in compressed storage");
    root["cubic_tensor"] = json{
        {"rows", G->rows()},
        {"cols", G->cols()},
        {"nonzeros", G->nonZeros()},
        {"outer", sink.i64(G->outerIndexPtr(), G->outerSize() + 1)},
        {"inner", sink.i64(G->innerIndexPtr(), G->nonZeros())},
        {"values", sink.f64(G->valuePtr(), G->nonZeros())}};
  }
  sink.finish();
  if (sink.used()) root["sidecar"] = sink.sidecar_name();
  write_json(root, file);
}

AssembledModel load_model(const std::filesystem::path& file) {
  const json root = parse_file(file, "polyenergy-model");
  try {
    if (root.at("model").get<std::string>() != "heat-fem")
      throw IoError(file.string() + ": unknown model type");
    PayloadSource src(file, root);

    AssembledModel model;
    const json& cj = root.at("config");
    model.config.elements = cj.at("elements").get<Index>();
    model.config.length = cj.at("length").get<double>();
    model.config.inputs = cj.at("inputs").get<Index>();
    model.config.outputs = cj.at("outputs").get<Index>();
    model.config.reaction = cj.at("reaction").get<double>();
    model.config.convection = cj.at("convection").get<double>();
    model.config.cubic = cj.at("cubic").get<double>();
    model.config.lumped_mass = cj.at("lumped_mass").get<bool>();
    model.config.initial_amplitude = cj.at("initial_amplitude").get<double>();
    model.config.validate();
    model.mesh_width = root.at("mesh_width").get<double>();

    const Index n = root.at("state_dim").get<Index>();
    const json& mj = root.at("matrices");
    model.sys.A = read_matrix(src, mj.at("a"));
    model.sys.B = read_matrix(src, mj.at("b"));
    model.sys.C = read_matrix(src, mj.at("c"));
    model.mass = read_matrix(src, mj.at("mass"));
    model.x0 = src.f64(root.at("x0"), n);
    if (model.sys.A.rows() != n || model.mass.rows() != n || model.mass.cols() != n)
      throw IoError(file.string() + ": matrix dimensions disagree with state_dim");

    if (root.contains("cubic_tensor")) {
      const json& tj = root.at("cubic_tensor");
      const auto rows = tj.at("rows").get<Index>();
      const auto cols = tj.at("cols").get<std::int64_t>();
      const auto nnz = tj.at("nonzeros").get<std::int64_t>();
      if (rows != n || cols != ipow(n, 3))
        throw IoError(file.string() + ": cubic tensor dimensions disagree with state_dim");
      const auto outer = src.i64(tj.at("outer"), rows + 1);
      const auto inner = src.i64(tj.at("inner"), nnz);
      const Vector values = src.f64(tj.at("values"), nnz);
      if (outer.front() != 0 || outer.back() != nnz || !std::is_sorted(outer.begin(), outer.end()))
        throw IoError(file.string() + ": corrupt cubic tensor index arrays");
      for (std::int64_t i = 0; i < nnz; ++i)
        if (inner[std::size_t(i)] < 0 || inner[std::size_t(i)] >= cols)
          throw IoError(file.string() + ": cubic tensor column index out of range");
      Eigen::Map<const SparseTensor> mapped(rows, cols, nnz, outer.data(), inner.data(),
                                            values.data());
      SparseTensor G = mapped;
      auto llt = std::make_shared<Eigen::LLT<Matrix>>(model.mass);
      if (llt->info() != Eigen::Success)
        throw IoError(file.string() + ": stored mass matrix is not positive definite");
      model.sys.drift.emplace(3, DriftTerm::mass_solve_sparse(3, std::move(G), std::move(llt)));
    }
    model.sys.validate();
    return model;
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

}  // namespace polyenergy
