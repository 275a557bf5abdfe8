#include "gapkit/artifact.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gapkit/util.hpp"

namespace gapkit {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("artifact: missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw DataError(std::string("artifact: field '") + key + "' is not a number");
  return v.get<double>();
}

std::uint64_t count(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw DataError(std::string("artifact: field '") + key + "' is not a non-negative integer");
  return v.get<std::uint64_t>();
}

bool flag(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) throw DataError(std::string("artifact: field '") + key + "' is not a boolean");
  return v.get<bool>();
}

Vector read_vector(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_array()) throw DataError(std::string("artifact: field '") + key + "' is not an array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw DataError(std::string("artifact: non-numeric entry in '") + key + "'");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Matrix read_matrix(const json& j, const char* key) {
  const json& m = field(j, key);
  const auto rows = static_cast<Eigen::Index>(count(m, "rows"));
  const auto cols = static_cast<Eigen::Index>(count(m, "cols"));
  const Vector flat = read_vector(m, "data");
  if (flat.size() != rows * cols) throw DataError(std::string("artifact: matrix '") + key + "' has wrong entry count");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj) out(i, jj) = flat[i * cols + jj];
  return out;
}

void require_dims(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) throw DataError(std::string("artifact: ") + what + " has inconsistent dimensions");
}

json encode(const ModalityStats& s) {
  json j{{"mean", vector_json(s.mean)}, {"trace", s.trace}, {"n", s.n}};
  if (s.covariance) j["covariance"] = matrix_json(*s.covariance);
  return j;
}

json encode(const AlignmentStats& s) {
  return {{"mu_src", vector_json(s.mu_src)},       {"mu_tgt", vector_json(s.mu_tgt)},
          {"trace_src", s.trace_src},              {"trace_tgt", s.trace_tgt},
          {"s", s.s},                              {"eps", s.eps},
          {"mu_drift", vector_json(s.mu_drift)},   {"calib_n", s.calib_n}};
}

json encode(const ReferenceFrame& f) {
  return {{"basis_u", matrix_json(f.basis_u)},
          {"energy_threshold", f.energy_threshold},
          {"created_at_step", f.created_at_step}};
}

json encode(const BlockwiseStats& s) {
  return {{"frame", encode(s.frame)},
          {"basis_v", matrix_json(s.basis_v)},
          {"t_u", matrix_json(s.t_u)},
          {"t_v", matrix_json(s.t_v)},
          {"mu_src", vector_json(s.mu_src)},
          {"mu_tgt", vector_json(s.mu_tgt)},
          {"mu_drift", vector_json(s.mu_drift)},
          {"eig_floor", s.eig_floor},
          {"floored_u", s.floored_u},
          {"floored_v", s.floored_v},
          {"calib_n", s.calib_n}};
}

ModalityStats decode_modality(const json& j) {
  ModalityStats s;
  s.mean = read_vector(j, "mean");
  s.trace = number(j, "trace");
  s.n = count(j, "n");
  if (j.contains("covariance")) {
    s.covariance = read_matrix(j, "covariance");
    require_dims(s.covariance->rows(), s.mean.size(), "covariance");
    require_dims(s.covariance->cols(), s.mean.size(), "covariance");
  }
  return s;
}

AlignmentStats decode_alignment(const json& j) {
  AlignmentStats s;
  s.mu_src = read_vector(j, "mu_src");
  s.mu_tgt = read_vector(j, "mu_tgt");
  s.trace_src = number(j, "trace_src");
  s.trace_tgt = number(j, "trace_tgt");
  s.s = number(j, "s");
  s.eps = number(j, "eps");
  s.mu_drift = read_vector(j, "mu_drift");
  s.calib_n = count(j, "calib_n");
  require_dims(s.mu_tgt.size(), s.mu_src.size(), "mu_tgt");
  // empty drift: affine-only operator
  if (s.mu_drift.size() != 0) require_dims(s.mu_drift.size(), s.mu_src.size(), "mu_drift");
  return s;
}

ReferenceFrame decode_frame(const json& j) {
  ReferenceFrame f;
  f.basis_u = read_matrix(j, "basis_u");
  f.energy_threshold = number(j, "energy_threshold");
  const json& step = field(j, "created_at_step");
  if (!step.is_number_integer()) throw DataError("artifact: created_at_step is not an integer");
  f.created_at_step = step.get<std::int64_t>();
  return f;
}

BlockwiseStats decode_blockwise(const json& j) {
  BlockwiseStats s;
  s.frame = decode_frame(field(j, "frame"));
  s.basis_v = read_matrix(j, "basis_v");
  s.t_u = read_matrix(j, "t_u");
  s.t_v = read_matrix(j, "t_v");
  s.mu_src = read_vector(j, "mu_src");
  s.mu_tgt = read_vector(j, "mu_tgt");
  s.mu_drift = read_vector(j, "mu_drift");
  s.eig_floor = number(j, "eig_floor");
  s.floored_u = flag(j, "floored_u");
  s.floored_v = flag(j, "floored_v");
  s.calib_n = count(j, "calib_n");
  const Eigen::Index d = s.mu_src.size();
  const Eigen::Index r = s.frame.rank();
  require_dims(s.frame.dims(), d, "frame");
  require_dims(s.basis_v.rows(), d, "basis_v");
  require_dims(s.basis_v.cols(), d - r, "basis_v");
  require_dims(s.t_u.rows(), r, "t_u");
  require_dims(s.t_u.cols(), r, "t_u");
  require_dims(s.t_v.rows(), d - r, "t_v");
  require_dims(s.t_v.cols(), d - r, "t_v");
  require_dims(s.mu_tgt.size(), d, "mu_tgt");
  require_dims(s.mu_drift.size(), d, "mu_drift");
  return s;
}

// nlohmann's dump uses shortest round-trip doubles; render them with 17
// significant digits instead.
void emit(const json& j, std::ostream& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << inner << json(it.key()).dump() << ": ";
        emit(it.value(), out, indent + 1);
      }
      out << '\n' << pad << '}';
      return;
    }
    case json::value_t::array: {
      const bool scalars = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (scalars) {
        out << '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out << ", ";
          emit(j[i], out, indent + 1);
        }
        out << ']';
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out << ",\n";
        out << inner;
        emit(j[i], out, indent + 1);
      }
      out << '\n' << pad << ']';
      return;
    }
    case json::value_t::number_float:
      out << format_double(j.get<double>());
      return;
    default:
      out << j.dump();
  }
}

}  // namespace

std::string payload_kind(const ArtifactPayload& payload) {
  switch (payload.index()) {
    case 0: return "modality_stats";
    case 1: return "alignment_stats";
    case 2: return "reference_frame";
    default: return "blockwise_stats";
  }
}

std::string artifact_to_text(const StatsArtifact& a) {
  json inputs = json::array();
  for (const auto& in : a.provenance.inputs)
    inputs.push_back({{"path", in.path}, {"sha256", in.sha256}, {"rows", in.rows}});
  json root{
      {"schema_version", a.schema_version},
      {"kind", payload_kind(a.payload)},
      {"payload", std::visit([](const auto& p) { return encode(p); }, a.payload)},
      {"provenance",
       {{"tool_version", a.provenance.tool_version}, {"inputs", inputs}, {"parameters", a.provenance.parameters}}},
  };
  std::ostringstream out;
  emit(root, out, 0);
  out << '\n';
  return out.str();
}

StatsArtifact artifact_from_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("artifact: not valid JSON: ") + e.what());
  }
  const json& version = field(root, "schema_version");
  if (!version.is_number_integer()) throw DataError("artifact: schema_version is not an integer");
  StatsArtifact a;
  a.schema_version = version.get<int>();
  if (a.schema_version != kArtifactSchemaVersion)
    throw VersionError("artifact: unsupported schema_version " + std::to_string(a.schema_version) +
                       " (this build reads " + std::to_string(kArtifactSchemaVersion) + ")");
  const json& kind = field(root, "kind");
  if (!kind.is_string()) throw DataError("artifact: kind is not a string");
  const std::string k = kind.get<std::string>();
  const json& payload = field(root, "payload");
  if (k == "modality_stats") a.payload = decode_modality(payload);
  else if (k == "alignment_stats") a.payload = decode_alignment(payload);
  else if (k == "reference_frame") a.payload = decode_frame(payload);
  else if (k == "blockwise_stats") a.payload = decode_blockwise(payload);
  else throw DataError("artifact: unknown kind '" + k + "'");

  if (root.contains("provenance")) {
    const json& p = root.at("provenance");
    if (p.contains("tool_version") && p.at("tool_version").is_string())
      a.provenance.tool_version = p.at("tool_version").get<std::string>();
    if (p.contains("inputs") && p.at("inputs").is_array()) {
      for (const auto& in : p.at("inputs")) {
        InputDigest d;
        d.path = field(in, "path").get<std::string>();
        d.sha256 = field(in, "sha256").get<std::string>();
        d.rows = count(in, "rows");
        a.provenance.inputs.push_back(std::move(d));
      }
    }
    if (p.contains("parameters") && p.at("parameters").is_object()) {
      for (auto it = p.at("parameters").begin(); it != p.at("parameters").end(); ++it) {
        if (!it.value().is_string()) throw DataError("artifact: provenance parameter '" + it.key() + "' is not a string");
        a.provenance.parameters[it.key()] = it.value().get<std::string>();
      }
    }
  }
  return a;
}

void save_artifact(const StatsArtifact& artifact, const std::filesystem::path& path) {
  write_atomic(path, artifact_to_text(artifact));
}

StatsArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open artifact " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return artifact_from_text(buf.str());
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace gapkit
