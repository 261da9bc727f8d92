#include "bopdmd/archive.hpp"

#include <fstream>
#include <string>

namespace bopdmd {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Exact: return "exact";
    case ModelKind::Optimized: return "optimized";
    case ModelKind::BopEnsemble: return "bop";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view text) {
  if (text == "exact") return ModelKind::Exact;
  if (text == "optimized") return ModelKind::Optimized;
  if (text == "bop") return ModelKind::BopEnsemble;
  throw Error(ErrorCode::ParseError, "unknown model kind '" + std::string(text) + "'");
}

json complex_to_json(const Eigen::MatrixXcd& m) {
  std::vector<double> re(static_cast<std::size_t>(m.size()));
  std::vector<double> im(static_cast<std::size_t>(m.size()));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    re[static_cast<std::size_t>(k)] = m.data()[k].real();
    im[static_cast<std::size_t>(k)] = m.data()[k].imag();
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

Eigen::MatrixXcd complex_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || re.size() != static_cast<std::size_t>(rows * cols) || im.size() != re.size()) {
    throw Error(ErrorCode::ParseError, "complex array has inconsistent size");
  }
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    m.data()[k] = cdouble(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
  }
  return m;
}

namespace {

json real_to_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"values", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd real_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || values.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::ParseError, "real array has inconsistent size");
  }
  return Eigen::Map<const Eigen::MatrixXd>(values.data(), rows, cols);
}

json model_to_json(const DmdModel& model) {
  return {{"modes", complex_to_json(model.modes)},
          {"eigenvalues", complex_to_json(model.eigenvalues)},
          {"amplitudes", complex_to_json(model.amplitudes)}};
}

DmdModel model_from_json(const json& j) {
  DmdModel model{complex_from_json(j.at("modes")), complex_from_json(j.at("eigenvalues")),
                 complex_from_json(j.at("amplitudes"))};
  if (model.eigenvalues.cols() != 1 || model.amplitudes.cols() != 1 ||
      model.modes.cols() != model.rank() || model.amplitudes.size() != model.rank()) {
    throw Error(ErrorCode::ParseError, "model arrays have inconsistent shapes");
  }
  return model;
}

json ensemble_to_json(const EnsembleStatistics& s) {
  return {{"mode_mean", complex_to_json(s.mode_mean)},
          {"mode_variance_real", real_to_json(s.mode_variance_real)},
          {"mode_variance_imag", real_to_json(s.mode_variance_imag)},
          {"eigenvalue_mean", complex_to_json(s.eigenvalue_mean)},
          {"eigenvalue_variance_real", real_to_json(s.eigenvalue_variance_real)},
          {"eigenvalue_variance_imag", real_to_json(s.eigenvalue_variance_imag)},
          {"amplitude_mean", complex_to_json(s.amplitude_mean)},
          {"amplitude_variance_real", real_to_json(s.amplitude_variance_real)},
          {"amplitude_variance_imag", real_to_json(s.amplitude_variance_imag)},
          {"accepted_trials", s.accepted_trials},
          {"rejected_trials", s.rejected_trials}};
}

EnsembleStatistics ensemble_from_json(const json& j) {
  EnsembleStatistics s;
  s.mode_mean = complex_from_json(j.at("mode_mean"));
  s.mode_variance_real = real_from_json(j.at("mode_variance_real"));
  s.mode_variance_imag = real_from_json(j.at("mode_variance_imag"));
  s.eigenvalue_mean = complex_from_json(j.at("eigenvalue_mean"));
  s.eigenvalue_variance_real = real_from_json(j.at("eigenvalue_variance_real"));
  s.eigenvalue_variance_imag = real_from_json(j.at("eigenvalue_variance_imag"));
  s.amplitude_mean = complex_from_json(j.at("amplitude_mean"));
  s.amplitude_variance_real = real_from_json(j.at("amplitude_variance_real"));
  s.amplitude_variance_imag = real_from_json(j.at("amplitude_variance_imag"));
  s.accepted_trials = j.at("accepted_trials").get<int>();
  s.rejected_trials = j.at("rejected_trials").get<int>();
  const Eigen::Index r = s.eigenvalue_mean.size();
  if (s.mode_mean.cols() != r || s.amplitude_mean.size() != r ||
      s.eigenvalue_variance_real.size() != r || s.eigenvalue_variance_imag.size() != r ||
      s.amplitude_variance_real.size() != r || s.amplitude_variance_imag.size() != r ||
      s.mode_variance_real.rows() != s.mode_mean.rows() || s.mode_variance_real.cols() != r ||
      s.mode_variance_imag.rows() != s.mode_mean.rows() || s.mode_variance_imag.cols() != r) {
    throw Error(ErrorCode::ParseError, "ensemble arrays have inconsistent shapes");
  }
  return s;
}

}  // namespace

json to_json(const ModelArchive& archive) {
  json doc = {{"schema_version", archive.schema_version},
              {"kind", std::string(to_string(archive.kind))},
              {"model", model_to_json(archive.model)},
              {"metadata", archive.metadata}};
  if (archive.ensemble) {
    doc["ensemble"] = ensemble_to_json(*archive.ensemble);
  }
  return doc;
}

ModelArchive archive_from_json(const json& doc) {
  try {
    ModelArchive archive;
    archive.schema_version = doc.at("schema_version").get<int>();
    if (archive.schema_version != kArchiveSchemaVersion) {
      throw Error(ErrorCode::ParseError,
                  "unsupported archive schema version " + std::to_string(archive.schema_version));
    }
    archive.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    archive.model = model_from_json(doc.at("model"));
    if (doc.contains("ensemble")) {
      archive.ensemble = ensemble_from_json(doc.at("ensemble"));
    }
    if (archive.kind == ModelKind::BopEnsemble && !archive.ensemble) {
      throw Error(ErrorCode::ParseError, "bop archive lacks ensemble statistics");
    }
    archive.metadata = doc.value("metadata", json::object());
    return archive;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed model archive: ") + e.what());
  }
}

void save_archive(const ModelArchive& archive, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << to_json(archive).dump(2) << '\n';
  if (!out) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

ModelArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return archive_from_json(doc);
}

}  // namespace bopdmd
