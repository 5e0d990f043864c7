#include "arspec/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arspec/error.hpp"

namespace arspec {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size() || errno == ERANGE) {
    throw Error(ErrorCode::InvalidSignal, path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto row = split(line);
    if (row.size() != t.header.size()) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(n) + ": expected " +
                                               std::to_string(t.header.size()) + " columns");
    }
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw Error(ErrorCode::InvalidInput, path.string() + ": missing header");
  return t;
}

void require_header(const CsvTable& t, const std::vector<std::string>& expected, const fs::path& path) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::InvalidInput, path.string() + ": expected header '" + want + "'");
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_signal_csv(const fs::path& path, const TimeSeriesEpoch& ts) {
  std::string s = "value\n";
  for (double v : ts.samples()) s += format_double(v) + "\n";
  write_text(path, s);
}

TimeSeriesEpoch read_signal_csv(const fs::path& path, double fs) {
  const auto t = read_csv(path);
  require_header(t, {"value"}, path);
  std::vector<double> x;
  x.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) x.push_back(parse_double(t.rows[i][0], path, t.line_numbers[i]));
  return TimeSeriesEpoch(std::move(x), fs);
}

void write_curve_csv(const fs::path& path, const SpectralCurve& curve, double fs) {
  std::string s = "omega,hz,value\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    s += format_double(curve.grid[k]) + "," + format_double(curve.grid[k] * fs) + "," + format_double(curve.values[k]) +
         "\n";
  }
  write_text(path, s);
}

SpectralCurve read_curve_csv(const fs::path& path) {
  const auto t = read_csv(path);
  require_header(t, {"omega", "hz", "value"}, path);
  SpectralCurve c;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    c.grid.push_back(parse_double(t.rows[i][0], path, t.line_numbers[i]));
    c.values.push_back(parse_double(t.rows[i][2], path, t.line_numbers[i]));
  }
  return c;
}

void write_trialset(const fs::path& index_path, const TrialSet& ts) {
  validate(ts);
  const auto dir = index_path.parent_path();
  std::string index = "file,subject,odor,condition,phase,fs\n";
  for (std::size_t i = 0; i < ts.trials.size(); ++i) {
    const auto& t = ts.trials[i];
    std::string name = t.file.empty() ? "trial_" + std::to_string(i) + ".csv" : fs::path(t.file).filename().string();
    write_signal_csv(dir / name, t.epoch);
    index += name + "," + t.subject + "," + t.odor + "," + std::string(to_string(t.cell.condition)) + "," +
             std::string(to_string(t.cell.period)) + "," + format_double(t.epoch.fs()) + "\n";
  }
  write_text(index_path, index);
}

TrialSet read_trialset(const fs::path& index_path) {
  const auto t = read_csv(index_path);
  require_header(t, {"file", "subject", "odor", "condition", "phase", "fs"}, index_path);
  TrialSet ts;
  const auto dir = index_path.parent_path();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const double fs = parse_double(r[5], index_path, t.line_numbers[i]);
    const fs::path file = fs::path(r[0]).is_absolute() ? fs::path(r[0]) : dir / r[0];
    ts.trials.push_back({read_signal_csv(file, fs), {parse_condition(r[3]), parse_period(r[4])}, r[1], r[2], r[0]});
  }
  validate(ts);
  return ts;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 15> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

}  // namespace arspec
