// Apache License, Version 2.0, refer to LICENSE.txt
#include "prgds/hyperfile.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "prgds/errors.hpp"

namespace prgds {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& value, const std::string& where) {
  double v = 0.0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto [next, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || next != end) {
    throw DataError(where + ": malformed number '" + value + "'");
  }
  return v;
}

long parse_long(const std::string& value, const std::string& where) {
  long v = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto [next, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || next != end) {
    throw DataError(where + ": malformed integer '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "0" || value == "false") return false;
  if (value == "1" || value == "true") return true;
  throw DataError(where + ": malformed flag '" + value + "' (want 0/1/true/false)");
}

}  // namespace

ModelHyper parse_hyper(std::istream& in, const std::string& origin) {
  ModelHyper hyper;
  std::set<std::string> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw DataError(where + ": expected key=value, got '" + body + "'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw DataError(where + ": empty key or value");
    }
    if (!seen.insert(key).second) {
      throw DataError(where + ": repeated key '" + key + "'");
    }
    if (key == "epsilon_theta") {
      hyper.eps_theta = parse_double(value, where);
    } else if (key == "epsilon_lambda") {
      hyper.eps_lambda = parse_double(value, where);
    } else if (key == "alpha0") {
      hyper.alpha0 = parse_double(value, where);
    } else if (key == "a0") {
      hyper.a0 = parse_double(value, where);
    } else if (key == "b0") {
      hyper.b0 = parse_double(value, where);
    } else if (key == "K") {
      hyper.num_components = parse_long(value, where);
    } else if (key == "stationary_rho") {
      hyper.stationary_rho = parse_bool(value, where);
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
  return hyper;
}

ModelHyper load_hyper_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  return parse_hyper(f, path);
}

void write_hyper(std::ostream& out, const ModelHyper& hyper,
                 std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << "\n";
  std::ostringstream num;
  num.precision(17);
  const auto fmt = [&num](double v) {
    num.str("");
    num << v;
    return num.str();
  };
  out << "epsilon_theta = " << fmt(hyper.eps_theta) << "\n"
      << "epsilon_lambda = " << fmt(hyper.eps_lambda) << "\n"
      << "alpha0 = " << fmt(hyper.alpha0) << "\n"
      << "a0 = " << fmt(hyper.a0) << "\n"
      << "b0 = " << fmt(hyper.b0) << "\n"
      << "K = " << hyper.num_components << "\n"
      << "stationary_rho = " << (hyper.stationary_rho ? "true" : "false")
      << "\n";
}

void write_hyper_file(const ModelHyper& hyper, const std::string& path,
                      std::span<const std::string> comments) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  write_hyper(f, hyper, comments);
  if (!f) throw DataError("write failed for " + path);
}

}  // namespace prgds
