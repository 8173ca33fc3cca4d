#include "dpmreg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dpmreg/errors.hpp"
#include "json.hpp"

namespace dpmreg {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "archive layout assumes little endian");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

// ---- CSV ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw DataError("unterminated quote on line " + std::to_string(lineno));
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t lineno, const std::string& column) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError("non-numeric value '" + s + "' on line " + std::to_string(lineno) +
                    " in column '" + column + "'");
  }
  return v;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<int>(k);
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, lineno);
    if (table.header.empty()) {
      for (auto& f : fields) table.header.push_back(trim(f));
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError("line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(table.header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) row[k] = parse_cell(fields[k], lineno, table.header[k]);
    rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw DataError(path.string() + " is empty");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].size(); ++k) table.values(r, k) = rows[r][k];
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw InvalidParameter("CSV header and value columns differ");
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << quote_if_needed(header[k]);
  os << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) os << (k ? "," : "") << values(r, k);
    os << '\n';
  }
  write_file(path, os.str());
}

Dataset dataset_from_table(const CsvTable& table, const std::string& response, bool log_response) {
  const int ycol = table.column(response);
  if (ycol < 0) throw DataError("response column '" + response + "' not found");
  Dataset data;
  data.response_name = response;
  const Eigen::Index n = table.values.rows();
  const Eigen::Index p = static_cast<Eigen::Index>(table.header.size()) - 1;
  data.y = table.values.col(ycol);
  data.X.resize(n, p);
  Eigen::Index l = 0;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (static_cast<int>(k) == ycol) continue;
    data.X.col(l++) = table.values.col(static_cast<Eigen::Index>(k));
    data.column_names.push_back(table.header[k]);
  }
  if (log_response) {
    if ((data.y.array() <= 0.0).any()) throw DataError("log response needs positive values");
    data.y = data.y.array().log().matrix();
  }
  data.validate();
  return data;
}

Eigen::MatrixXd covariates_from_table(const CsvTable& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd X(table.values.rows(), static_cast<Eigen::Index>(names.size()));
  std::string missing;
  for (std::size_t l = 0; l < names.size(); ++l) {
    const int k = table.column(names[l]);
    if (k < 0) {
      missing += (missing.empty() ? "" : ", ") + names[l];
      continue;
    }
    X.col(static_cast<Eigen::Index>(l)) = table.values.col(k);
  }
  if (!missing.empty()) throw DataError("missing columns: " + missing);
  return X;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::string> header{data.response_name};
  Eigen::MatrixXd values(data.n(), data.p() + 1);
  values.col(0) = data.y;
  values.rightCols(data.p()) = data.X;
  for (Eigen::Index l = 0; l < data.p(); ++l) {
    header.push_back(static_cast<std::size_t>(l) < data.column_names.size()
                         ? data.column_names[l]
                         : "x" + std::to_string(l + 1));
  }
  write_csv(path, header, values);
}

// ---- normalization ----

namespace {

ColumnScaling column_scaling(const Eigen::VectorXd& v, const std::string& name) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
  if (!(var > 0.0)) throw DataError("column '" + name + "' is constant and cannot be normalized");
  return {mean, std::sqrt(var)};
}

}  // namespace

NormState fit_normalization(const Dataset& data) {
  data.validate();
  NormState s;
  s.response = column_scaling(data.y, data.response_name);
  for (Eigen::Index l = 0; l < data.p(); ++l) {
    const std::string name = static_cast<std::size_t>(l) < data.column_names.size()
                                 ? data.column_names[l]
                                 : "x" + std::to_string(l + 1);
    s.covariates.push_back(column_scaling(data.X.col(l), name));
  }
  return s;
}

Eigen::MatrixXd normalize_covariates(const Eigen::MatrixXd& X, const NormState& state) {
  if (static_cast<std::size_t>(X.cols()) != state.covariates.size())
    throw DataError("covariate count does not match the stored normalization");
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index l = 0; l < X.cols(); ++l)
    out.col(l) = (X.col(l).array() - state.covariates[l].mean) / state.covariates[l].sd;
  return out;
}

Eigen::VectorXd normalize_response(const Eigen::VectorXd& y, const NormState& state) {
  return ((y.array() - state.response.mean) / state.response.sd).matrix();
}

Eigen::VectorXd denormalize_response(const Eigen::VectorXd& y, const NormState& state) {
  return (y.array() * state.response.sd + state.response.mean).matrix();
}

Dataset normalize(const Dataset& data, const NormState& state) {
  Dataset out = data;
  out.X = normalize_covariates(data.X, state);
  out.y = normalize_response(data.y, state);
  out.norm_state = state;
  return out;
}

// ---- archive ----

namespace {

json hyper_to_json(const Hyperparams& h) {
  json j = {{"n0", h.n0},
            {"m0", h.m0},
            {"nu0", h.nu0},
            {"s0sq", h.s0sq},
            {"alpha0", h.alpha0},
            {"theta0", h.theta0},
            {"alpha_shape", h.alpha_shape},
            {"alpha_scale", h.alpha_scale},
            {"nu_mu", h.nu_mu},
            {"baseline", to_string(h.baseline)},
            {"normalfull_eta_var", h.normalfull_eta_var},
            {"normalfull_wishart_scale", h.normalfull_wishart_scale}};
  j["normalfull_wishart_df"] =
      h.normalfull_wishart_df ? json(*h.normalfull_wishart_df) : json(nullptr);
  return j;
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.n0 = j.at("n0");
  h.m0 = j.at("m0");
  h.nu0 = j.at("nu0");
  h.s0sq = j.at("s0sq");
  h.alpha0 = j.at("alpha0");
  h.theta0 = j.at("theta0");
  h.alpha_shape = j.at("alpha_shape");
  h.alpha_scale = j.at("alpha_scale");
  h.nu_mu = j.at("nu_mu");
  h.baseline = parse_baseline(j.at("baseline"));
  h.normalfull_eta_var = j.at("normalfull_eta_var");
  h.normalfull_wishart_scale = j.at("normalfull_wishart_scale");
  if (!j.at("normalfull_wishart_df").is_null()) h.normalfull_wishart_df = j.at("normalfull_wishart_df").get<double>();
  return h;
}

json scaling_to_json(const ColumnScaling& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }
ColumnScaling scaling_from_json(const json& j) { return {j.at("mean"), j.at("sd")}; }

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_vector(const Eigen::VectorXd& v) {
    out_.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
  }
  void put_bytes(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Eigen::VectorXd get_vector(std::size_t len) {
    need(sizeof(double) * len);
    Eigen::VectorXd v(static_cast<Eigen::Index>(len));
    std::memcpy(v.data(), bytes_.data() + pos_, sizeof(double) * len);
    pos_ += sizeof(double) * len;
    return v;
  }
  std::string get_bytes(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t len) const {
    if (pos_ + len > bytes_.size()) throw DataError("posterior archive is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[] = "DPMREG";

}  // namespace

std::string serialize_archive(const Archive& a) {
  const auto& m = a.draws.meta;
  json header = {
      {"hyper", hyper_to_json(a.hyper)},
      {"chain",
       {{"iterations", a.chain.iterations},
        {"burn_in", a.chain.burn_in},
        {"thin", a.chain.thin},
        {"seed", a.chain.seed},
        {"store_covariate_params", a.chain.store_covariate_params},
        {"truncation_cap", a.chain.truncation_cap}}},
      {"columns", a.columns},
      {"response", a.response},
      {"log_response", a.log_response},
      {"meta",
       {{"iterations", m.iterations},
        {"burn_in", m.burn_in},
        {"thin", m.thin},
        {"seed", m.seed},
        {"baseline", to_string(m.baseline)},
        {"ng_V", m.ng_V},
        {"has_covariate_params", m.has_covariate_params},
        {"n", a.draws.n},
        {"p", a.draws.p}}},
  };
  if (a.norm_state) {
    json cov = json::array();
    for (const auto& s : a.norm_state->covariates) cov.push_back(scaling_to_json(s));
    header["norm_state"] = {{"response", scaling_to_json(a.norm_state->response)}, {"covariates", cov}};
  } else {
    header["norm_state"] = nullptr;
  }
  const std::string text = header.dump();

  Writer w;
  w.put_bytes(std::string(kMagic, 6));
  w.put<std::uint32_t>(kArchiveVersion);
  w.put<std::uint64_t>(text.size());
  w.put_bytes(text);
  w.put<std::uint64_t>(a.draws.draws.size());
  for (const auto& d : a.draws.draws) {
    w.put<double>(d.sigma2);
    w.put<double>(d.alpha);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(d.clusters.size()));
    for (int label : d.labels) w.put<std::uint32_t>(static_cast<std::uint32_t>(label));
    for (const auto& c : d.clusters) {
      w.put<double>(c.mu);
      w.put_vector(c.beta);
      if (m.has_covariate_params) {
        w.put_vector(c.m);
        w.put_vector(c.tau);
      }
    }
  }
  return w.take();
}

Archive deserialize_archive(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(6) != std::string(kMagic, 6)) throw DataError("not a posterior archive (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kArchiveVersion)
    throw DataError("unsupported archive version " + std::to_string(version));
  const auto header_len = r.get<std::uint64_t>();
  Archive a;
  try {
    const json header = json::parse(r.get_bytes(header_len));
    a.hyper = hyper_from_json(header.at("hyper"));
    const auto& c = header.at("chain");
    a.chain.iterations = c.at("iterations");
    a.chain.burn_in = c.at("burn_in");
    a.chain.thin = c.at("thin");
    a.chain.seed = c.at("seed");
    a.chain.store_covariate_params = c.at("store_covariate_params");
    a.chain.truncation_cap = c.at("truncation_cap");
    a.columns = header.at("columns").get<std::vector<std::string>>();
    a.response = header.at("response");
    a.log_response = header.at("log_response");
    const auto& m = header.at("meta");
    auto& meta = a.draws.meta;
    meta.iterations = m.at("iterations");
    meta.burn_in = m.at("burn_in");
    meta.thin = m.at("thin");
    meta.seed = m.at("seed");
    meta.baseline = parse_baseline(m.at("baseline"));
    meta.ng_V = m.at("ng_V");
    meta.has_covariate_params = m.at("has_covariate_params");
    a.draws.n = m.at("n");
    a.draws.p = m.at("p");
    const auto& ns = header.at("norm_state");
    if (!ns.is_null()) {
      NormState s;
      s.response = scaling_from_json(ns.at("response"));
      for (const auto& cj : ns.at("covariates")) s.covariates.push_back(scaling_from_json(cj));
      a.norm_state = std::move(s);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed archive header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed archive header: ") + e.what());
  }
  const auto n = static_cast<std::size_t>(a.draws.n);
  const auto p = static_cast<std::size_t>(a.draws.p);
  const auto S = r.get<std::uint64_t>();
  a.draws.draws.resize(S);
  for (auto& d : a.draws.draws) {
    d.sigma2 = r.get<double>();
    d.alpha = r.get<double>();
    const auto K = r.get<std::uint32_t>();
    d.labels.resize(n);
    for (auto& label : d.labels) label = static_cast<int>(r.get<std::uint32_t>());
    d.clusters.resize(K);
    for (auto& c : d.clusters) {
      c.mu = r.get<double>();
      c.beta = r.get_vector(p);
      if (a.draws.meta.has_covariate_params) {
        c.m = r.get_vector(p);
        c.tau = r.get_vector(p);
      }
    }
  }
  if (!r.done()) throw DataError("posterior archive has trailing bytes");
  a.draws.validate();
  return a;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  write_file(path, serialize_archive(archive));
}

Archive read_archive(const std::filesystem::path& path) { return deserialize_archive(read_file(path)); }

// ---- truth sidecar ----

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_truth_json(const std::filesystem::path& path, const SimTruth& truth) {
  json comps = json::array();
  for (const auto& c : truth.components) {
    comps.push_back({{"mu", c.mu},
                     {"beta", vec_to_json(c.beta)},
                     {"m", vec_to_json(c.m)},
                     {"tau", vec_to_json(c.tau)}});
  }
  const json j = {{"labels", truth.labels}, {"sigma2", truth.sigma2}, {"components", comps}};
  write_file(path, j.dump(1) + "\n");
}

SimTruth read_truth_json(const std::filesystem::path& path) {
  SimTruth t;
  try {
    const json j = json::parse(read_file(path));
    t.labels = j.at("labels").get<std::vector<int>>();
    t.sigma2 = j.at("sigma2");
    for (const auto& cj : j.at("components")) {
      ComponentSpec c;
      c.mu = cj.at("mu");
      c.beta = vec_from_json(cj.at("beta"));
      c.m = vec_from_json(cj.at("m"));
      c.tau = vec_from_json(cj.at("tau"));
      t.components.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed truth file: ") + e.what());
  }
  for (int label : t.labels)
    if (label < 0 || label >= static_cast<int>(t.components.size()))
      throw DataError("truth labels reference a missing component");
  return t;
}

}  // namespace dpmreg
