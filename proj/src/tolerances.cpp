#include "instro/tolerances.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace instro {

namespace {

double parse_positive(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("tolerance: cannot parse '" + s + "'");
  }
  if (used != s.size() || !(v > 0.0)) throw std::invalid_argument("tolerance: expected a positive number, got '" + s + "'");
  return v;
}

}  // namespace

Tolerances Tolerances::parse(const std::string& text) {
  Tolerances t;
  if (text.find('=') == std::string::npos) {
    t.psd = t.eq = parse_positive(text);
    return t;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("tolerance: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const double v = parse_positive(item.substr(eq + 1));
    if (key == "herm") t.herm = v;
    else if (key == "psd") t.psd = v;
    else if (key == "eq") t.eq = v;
    else if (key == "rank") t.rank = v;
    else throw std::invalid_argument("tolerance: unknown key '" + key + "'");
  }
  return t;
}

Tolerances Tolerances::from_env() {
  const char* env = std::getenv("INSTROCOMPAT_TOL");
  if (env == nullptr || *env == '\0') return {};
  return parse(env);
}

}  // namespace instro
