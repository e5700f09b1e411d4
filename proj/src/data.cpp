#include "ciftree/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ciftree {

void Dataset::validate() const {
  const int p = n_covariates();
  for (int i = 0; i < n(); ++i) {
    const Observation& o = observations[i];
    if (!(o.time > 0.0) || !std::isfinite(o.time)) {
      throw csv_error("nonpositive time at row " + std::to_string(i + 1));
    }
    if (o.delta != 0 && o.delta != 1) {
      throw csv_error("status must be 0 or 1 at row " + std::to_string(i + 1));
    }
    if ((o.delta == 1) != (o.cause >= 1)) {
      throw csv_error("cause/status mismatch at row " + std::to_string(i + 1) +
                      ": cause must be >= 1 exactly when status is 1");
    }
    if (o.cause < 0 || o.cause > n_causes) {
      throw csv_error("cause " + std::to_string(o.cause) + " out of range at row " +
                      std::to_string(i + 1));
    }
    if (static_cast<int>(o.covariates.size()) != p) {
      throw csv_error("ragged covariate row " + std::to_string(i + 1));
    }
    for (double w : o.covariates) {
      if (!std::isfinite(w)) {
        throw csv_error("missing or non-finite covariate at row " + std::to_string(i + 1));
      }
    }
  }
}

TimeGrid::TimeGrid(std::vector<double> ts, std::vector<double> ws)
    : times(std::move(ts)), weights(std::move(ws)) {
  if (times.empty()) throw error("time grid must not be empty");
  for (size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] > 0.0)) throw error("time grid values must be positive");
    if (j > 0 && !(times[j] > times[j - 1])) {
      throw error("time grid must be strictly increasing");
    }
  }
  if (weights.empty()) {
    weights.assign(times.size(), 1.0 / static_cast<double>(times.size()));
    return;
  }
  if (weights.size() != times.size()) throw error("grid weights/times length mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw error("grid weights must be positive");
    total += w;
  }
  for (double& w : weights) w /= total;
}

namespace {

// RFC-4180-ish field splitter: handles quoted fields and escaped quotes,
// which is all the numeric files we read or write ever need.
std::vector<std::string> split_csv_line(const std::string& line, int row) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw csv_error("unterminated quote at row " + std::to_string(row));
  out.push_back(field);
  return out;
}

double parse_double(const std::string& s, int row, const std::string& col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw csv_error("cannot parse '" + s + "' in column " + col + " at row " +
                    std::to_string(row));
  }
}

int parse_int(const std::string& s, int row, const std::string& col) {
  double v = parse_double(s, row, col);
  int iv = static_cast<int>(std::lround(v));
  if (std::abs(v - iv) > 1e-9) {
    throw csv_error("expected integer in column " + col + " at row " + std::to_string(row));
  }
  return iv;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, int n_causes_override) {
  std::ifstream in(path);
  if (!in) throw csv_error("cannot open " + path);

  std::string line;
  int row = 0;
  // Header (comment lines starting with '#' are skipped).
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line[0] == '#') continue;
    header = split_csv_line(line, row);
    break;
  }
  if (header.empty()) throw csv_error("missing header in " + path);

  auto col_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw csv_error("column '" + name + "' not found in " + path);
    return static_cast<int>(it - header.begin());
  };

  const int time_col = col_index(schema.time);
  const int status_col = col_index(schema.status);
  const int cause_col = col_index(schema.cause);

  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
      if (c == time_col || c == status_col || c == cause_col) continue;
      cov_cols.push_back(c);
      cov_names.push_back(header[c]);
    }
  } else {
    for (const std::string& name : schema.covariates) {
      cov_cols.push_back(col_index(name));
      cov_names.push_back(name);
    }
  }

  Dataset data;
  data.covariate_names = cov_names;
  int max_cause = 0;
  int data_row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    ++data_row;
    std::vector<std::string> fields = split_csv_line(line, row);
    if (fields.size() != header.size()) {
      throw csv_error("ragged row " + std::to_string(data_row) + " in " + path + " (" +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()) + ")");
    }
    Observation o;
    o.time = parse_double(fields[time_col], data_row, schema.time);
    o.delta = parse_int(fields[status_col], data_row, schema.status);
    o.cause = parse_int(fields[cause_col], data_row, schema.cause);
    o.covariates.reserve(cov_cols.size());
    for (size_t k = 0; k < cov_cols.size(); ++k) {
      o.covariates.push_back(parse_double(fields[cov_cols[k]], data_row, cov_names[k]));
    }
    max_cause = std::max(max_cause, o.cause);
    data.observations.push_back(std::move(o));
  }
  if (data.observations.empty()) throw csv_error("no data rows in " + path);
  data.n_causes = n_causes_override > 0 ? n_causes_override : std::max(2, max_cause);
  data.validate();
  return data;
}

void save_csv(const Dataset& data, const std::string& path,
              const std::vector<std::string>& header_comments) {
  std::ofstream out(path);
  if (!out) throw csv_error("cannot write " + path);
  for (const std::string& c : header_comments) out << "# " << c << "\n";
  out << "time,status,cause";
  for (const std::string& name : data.covariate_names) out << "," << name;
  out << "\n";
  for (const Observation& o : data.observations) {
    out << format_double(o.time) << "," << o.delta << "," << o.cause;
    for (double w : o.covariates) out << "," << format_double(w);
    out << "\n";
  }
}

std::vector<std::vector<int>> split_folds(int n, int q, std::uint64_t seed) {
  if (q < 2 || q > n) {
    throw error("fold count must satisfy 2 <= Q <= n (got Q=" + std::to_string(q) +
                ", n=" + std::to_string(n) + ")");
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<int>> folds(q);
  for (int i = 0; i < n; ++i) folds[i % q].push_back(idx[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ciftree
