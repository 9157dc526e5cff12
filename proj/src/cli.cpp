#include "instro/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "instro/catalog.hpp"

namespace instro::cli {

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::map<std::string, std::string> parse_params(const std::string& text, const std::string& name) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("catalog:" + name + ": parameter '" + item + "' is not of the form key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

double param_double(std::map<std::string, std::string>& p, const std::string& key, double def, const std::string& name) {
  auto it = p.find(key);
  if (it == p.end()) return def;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    p.erase(it);
    return v;
  } catch (const std::exception&) {
    throw UsageError("catalog:" + name + ": parameter '" + key + "' must be a number");
  }
}

void reject_unknown(const std::map<std::string, std::string>& p, const std::string& name) {
  if (!p.empty()) throw UsageError("catalog:" + name + ": unknown parameter '" + p.begin()->first + "'");
}

Povm povm_of(const Device& d, const std::string& ref) {
  if (const auto* p = std::get_if<Povm>(&d)) return *p;
  const auto& ins = std::get<Instrument>(d);
  if (!ins.is_povm_like()) throw UsageError("'" + ref + "' is not a POVM");
  return induced_povm(ins);
}

Device resolve_catalog(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "luders") {
    if (rest.empty()) throw UsageError("catalog:luders needs a POVM reference, e.g. catalog:luders:z");
    const std::string inner = rest.rfind("catalog:", 0) == 0 || std::filesystem::exists(rest) ? rest : "catalog:" + rest;
    return luders_instrument(povm_of(resolve_device(inner), inner));
  }
  auto p = parse_params(rest, name);
  Device d;
  if (name.size() > 2 && name.rfind("id", 0) == 0 && name.find_first_not_of("0123456789", 2) == std::string::npos) {
    d = identity_channel(std::stoul(name.substr(2)));
  } else if (name == "id") {
    const double dim = param_double(p, "d", 2.0, name);
    if (dim < 1 || dim != std::floor(dim)) throw UsageError("catalog:id: d must be a positive integer");
    d = identity_channel(static_cast<std::size_t>(dim));
  } else if (name == "pauli") {
    d = pauli_instrument();
  } else if (name == "z") {
    d = sharp_z();
  } else if (name == "x") {
    d = sharp_x();
  } else if (name == "noisy-z" || name == "noisy-x") {
    const double v = param_double(p, "v", 0.5, name);
    if (v < 0.0 || v > 1.0) throw UsageError("catalog:" + name + ": v must lie in [0, 1]");
    d = name == "noisy-z" ? noisy_z(v) : noisy_x(v);
  } else if (name == "xz") {
    const double a = param_double(p, "a", 1.0, name);
    if (a < 0.0 || a > 1.0) throw UsageError("catalog:xz: a must lie in [0, 1]");
    std::string which = "i";
    if (auto it = p.find("which"); it != p.end()) {
      which = it->second;
      p.erase(it);
    }
    if (which != "i" && which != "j") throw UsageError("catalog:xz: which must be 'i' (X) or 'j' (Z)");
    auto pair = xz_map_instruments(a);
    d = which == "i" ? pair.first : pair.second;
  } else if (name == "trash") {
    const double pr = param_double(p, "p", 0.5, name);
    const double dim = param_double(p, "d", 2.0, name);
    if (pr < 0.0 || pr > 1.0) throw UsageError("catalog:trash: p must lie in [0, 1]");
    if (dim < 1 || dim != std::floor(dim)) throw UsageError("catalog:trash: d must be a positive integer");
    const CMatrix s0 = CMatrix::diag({1.0, 0.0}), s1 = CMatrix::diag({0.0, 1.0});
    d = trash_and_prepare({pr, 1.0 - pr}, {s0, s1}, static_cast<std::size_t>(dim));
  } else {
    throw UsageError("unknown catalog device '" + name + "'");
  }
  reject_unknown(p, name);
  return d;
}

json tolerances_json(const Tolerances& t) { return {{"herm", t.herm}, {"psd", t.psd}, {"eq", t.eq}, {"rank", t.rank}}; }

json config_json(const CompatOptions& o) {
  return {{"feas_tol", o.solver.feas_tol},
          {"gap_tol", o.solver.gap_tol},
          {"max_iter", o.solver.max_iter},
          {"facial_reduction", o.solver.facial_reduction},
          {"polish", o.solver.polish},
          {"traditional", o.traditional},
          {"dilation", o.dilation == DilationKind::Canonical ? "canonical" : "minimal"},
          {"tolerances", tolerances_json(o.tol)}};
}

json verdict_json(const sdp::Verdict& v) {
  json j = {{"status", sdp::to_string(v.status)},
            {"margin", v.margin},
            {"margin_kind", v.margin_kind},
            {"iterations", v.iterations},
            {"residual", v.residual}};
  if (v.strictly_feasible) j["strictly_feasible"] = *v.strictly_feasible;
  return j;
}

int exit_code(sdp::Status s) { return s == sdp::Status::Undecided ? 2 : 0; }

void write_report(const json& report, const std::string& path) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report to '" + path + "'");
  f << report.dump(2) << "\n";
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

struct Common {
  double feas_tol = sdp::SolverConfig{}.feas_tol;
  double gap_tol = sdp::SolverConfig{}.gap_tol;
  int max_iter = sdp::SolverConfig{}.max_iter;
  std::string out;
};

void add_common(CLI::App* sc, Common& c) {
  sc->add_option("--feas-tol", c.feas_tol, "feasibility tolerance")->check(CLI::PositiveNumber);
  sc->add_option("--gap-tol", c.gap_tol, "infeasibility gap tolerance")->check(CLI::PositiveNumber);
  sc->add_option("--max-iter", c.max_iter, "iteration budget")->check(CLI::PositiveNumber);
  sc->add_option("--out", c.out, "JSON report path");
}

CompatOptions options_from(const Common& c) {
  CompatOptions o;
  o.tol = Tolerances::from_env();
  o.solver.feas_tol = c.feas_tol;
  o.solver.gap_tol = c.gap_tol;
  o.solver.max_iter = c.max_iter;
  return o;
}

Route parse_route(const std::string& r) {
  if (r == "direct") return Route::DirectSdp;
  if (r == "complementary") return Route::ViaComplementary;
  if (r == "jordan") return Route::JordanProduct;
  throw UsageError("unknown route '" + r + "'");
}

}  // namespace

Device resolve_device(const std::string& ref) {
  if (ref.rfind("catalog:", 0) == 0) return resolve_catalog(ref.substr(8));
  return load_device_file(ref);
}

ScanResult scan_xz(double from, double to, double step, const CompatOptions& opts) {
  if (!(step > 0.0)) throw UsageError("scan: step must be positive");
  if (from < 0.0 || to > 1.0 || from > to) throw UsageError("scan: need 0 <= from <= to <= 1");
  ScanResult res;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    ScanRow row;
    // Rounded so that the grid reproduces decimal values such as 0.70 exactly.
    row.a = std::min(to, std::round((from + static_cast<double>(k) * step) * 1e12) / 1e12);
    const auto [i, j] = xz_map_instruments(row.a);
    const QChannel phi = induced_channel(i), psi = induced_channel(j);
    row.min_eig = min_eig(jordan_product_choi(phi, psi).hermitian_part());
    CompatReport rep = check_compatible_jordan(phi, psi, opts);
    row.route = "jordan";
    if (!rep.decided()) {
      rep = check_compatible(Instrument::channel(phi), Instrument::channel(psi), opts);
      row.route = "direct";
    }
    row.status = rep.verdict.status;
    row.margin = rep.verdict.margin;
    row.margin_kind = rep.verdict.margin_kind;
    res.rows.push_back(std::move(row));
  }
  for (std::size_t k = 1; k < res.rows.size(); ++k)
    if ((res.rows[k - 1].min_eig >= 0.0) != (res.rows[k].min_eig >= 0.0)) {
      res.sign_change_lo = res.rows[k - 1].a;
      res.sign_change_hi = res.rows[k].a;
      break;
    }
  return res;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compatibility, postprocessing and dilation tools for quantum instruments", "instrocompat"};
  app.require_subcommand(1, 1);

  Common c_check, c_pp, c_comp, c_cls, c_demo, c_scan;
  std::string a_ref, b_ref, route = "direct";
  bool traditional = false;
  auto* check = app.add_subcommand("check", "decide compatibility of two devices");
  check->add_option("--a", a_ref, "first device")->required();
  check->add_option("--b", b_ref, "second device")->required();
  check->add_option("--route", route, "direct, complementary or jordan")
      ->check(CLI::IsMember({"direct", "complementary", "jordan"}));
  check->add_flag("--traditional", traditional, "common output space, no partial traces");
  add_common(check, c_check);

  std::string target_ref, source_ref;
  auto* pp = app.add_subcommand("postprocess", "decide whether TARGET is a postprocessing of SOURCE");
  pp->add_option("--target", target_ref, "target device")->required();
  pp->add_option("--source", source_ref, "source device")->required();
  add_common(pp, c_pp);

  std::string comp_ref, dil_kind = "canonical";
  auto* comp = app.add_subcommand("complement", "dilation and complementary instrument");
  comp->add_option("--a", comp_ref, "device")->required();
  comp->add_option("--dilation", dil_kind, "canonical or minimal")->check(CLI::IsMember({"canonical", "minimal"}));
  add_common(comp, c_comp);

  std::string cls_ref;
  auto* cls = app.add_subcommand("classify", "structural classification of a device");
  cls->add_option("device", cls_ref, "device")->required();
  add_common(cls, c_cls);

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "reproduce a named example");
  demo->add_option("name", demo_name, "xz-threshold")->required()->check(CLI::IsMember({"xz-threshold"}));
  add_common(demo, c_demo);

  std::string family = "xz", format = "csv";
  double step = 0.05, from = 0.0, to = 1.0;
  auto* scan = app.add_subcommand("scan", "sweep a one-parameter catalog family");
  scan->add_option("--family", family, "family name")->check(CLI::IsMember({"xz"}));
  scan->add_option("--step", step, "grid step")->check(CLI::PositiveNumber);
  scan->add_option("--from", from, "first grid point");
  scan->add_option("--to", to, "last grid point");
  scan->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  add_common(scan, c_scan);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (check->parsed()) {
      CompatOptions o = options_from(c_check);
      o.traditional = traditional;
      const Instrument i = as_instrument(resolve_device(a_ref));
      const Instrument j = as_instrument(resolve_device(b_ref));
      const CompatReport rep = check_compatible_route(i, j, parse_route(route), o);
      out << "compatibility: " << sdp::to_string(rep.verdict.status) << "\n"
          << "route: " << to_string(rep.route) << "\n"
          << "margin: " << fmt(rep.verdict.margin) << " (" << rep.verdict.margin_kind << ")\n"
          << "iterations: " << rep.verdict.iterations << "\n";
      if (rep.joint) out << "marginal error: " << fmt(rep.marginal_error, 3) << "\n";
      json report = {{"command", "check"}, {"a", a_ref}, {"b", b_ref}, {"route", to_string(rep.route)},
                     {"config", config_json(o)}, {"verdict", verdict_json(rep.verdict)}};
      if (rep.joint) {
        report["joint"] = to_json(*rep.joint);
        report["marginal_error"] = rep.marginal_error;
      }
      write_report(report, c_check.out);
      return exit_code(rep.verdict.status);
    }
    if (pp->parsed()) {
      const CompatOptions o = options_from(c_pp);
      const Instrument t = as_instrument(resolve_device(target_ref));
      const Instrument s = as_instrument(resolve_device(source_ref));
      const PostprocessReport rep = check_postprocessing(t, s, o);
      out << "postprocessing: " << sdp::to_string(rep.verdict.status) << "\n"
          << "margin: " << fmt(rep.verdict.margin) << " (" << rep.verdict.margin_kind << ")\n";
      if (rep.processors) out << "reconstruction error: " << fmt(rep.reconstruction_error, 3) << "\n";
      json report = {{"command", "postprocess"}, {"target", target_ref}, {"source", source_ref},
                     {"config", config_json(o)}, {"verdict", verdict_json(rep.verdict)}};
      if (rep.processors) {
        json procs = json::object();
        for (std::size_t x = 0; x < s.size(); ++x) procs[s.outcomes()[x]] = to_json((*rep.processors)[x]);
        report["processors"] = std::move(procs);
        report["reconstruction_error"] = rep.reconstruction_error;
      }
      write_report(report, c_pp.out);
      return exit_code(rep.verdict.status);
    }
    if (comp->parsed()) {
      CompatOptions o = options_from(c_comp);
      const Instrument i = as_instrument(resolve_device(comp_ref));
      const Dilation dil = dil_kind == "minimal" ? minimal_dilation(i, o.tol) : canonical_dilation(i, o.tol);
      const Instrument ic = complementary_instrument(i, dil, o.tol);
      out << "dilation: " << dil_kind << ", ancilla dimension " << dil.dim_anc << "\n"
          << "complementary instrument: " << ic.size() << " outcomes, C^" << ic.dim_in() << " -> C^" << ic.dim_out()
          << "\n";
      write_report({{"command", "complement"}, {"a", comp_ref}, {"config", config_json(o)},
                    {"dilation", to_json(dil)}, {"complementary", to_json(ic)}},
                   c_comp.out);
      return 0;
    }
    if (cls->parsed()) {
      const CompatOptions o = options_from(c_cls);
      const Instrument i = as_instrument(resolve_device(cls_ref));
      const DeviceClassReport r = classify(i, o.tol);
      auto yn = [](bool b) { return b ? "true" : "false"; };
      out << "indecomposable=" << yn(r.is_indecomposable) << "\n"
          << "m&p=" << yn(r.is_measure_and_prepare) << "\n"
          << "rank1_povm=" << yn(r.is_rank1_povm) << "\n"
          << "sharp=" << yn(r.is_sharp) << "\n"
          << "trash_and_prepare=" << yn(r.is_trash_and_prepare) << "\n"
          << "mp_residual=" << fmt(r.mp_residual, 3) << "\n";
      json states = json::array();
      for (const auto& s : r.prepared_states) states.push_back(matrix_to_json(s));
      write_report({{"command", "classify"},
                    {"device", cls_ref},
                    {"config", config_json(o)},
                    {"is_indecomposable", r.is_indecomposable},
                    {"is_measure_and_prepare", r.is_measure_and_prepare},
                    {"is_rank1_povm", r.is_rank1_povm},
                    {"is_sharp", r.is_sharp},
                    {"is_trash_and_prepare", r.is_trash_and_prepare},
                    {"prepared_states_pure", r.prepared_states_pure},
                    {"max_kraus_rank", r.max_kraus_rank},
                    {"mp_residual", r.mp_residual},
                    {"measured", to_json(r.measured)},
                    {"prepared_states", states}},
                   c_cls.out);
      return 0;
    }
    if (demo->parsed()) {
      const CompatOptions o = options_from(c_demo);
      out << "xz-threshold: min_eig of the Jordan product Choi of the induced channels\n"
          << "    a      min_eig   jordan_psd\n";
      json rows = json::array();
      for (int k = 0; k <= 10; ++k) {
        const double a = k / 10.0;
        const auto [i, j] = xz_map_instruments(a);
        const double lam = min_eig(jordan_product_choi(induced_channel(i), induced_channel(j)).hermitian_part());
        const bool psd = lam >= -o.solver.feas_tol;
        out << std::fixed << std::setprecision(2) << std::setw(5) << a << "  " << std::setprecision(6)
            << std::setw(11) << lam << "   " << (psd ? "yes" : "no") << "\n";
        rows.push_back({{"a", a}, {"min_eig", lam}, {"jordan_psd", psd}});
      }
      out.unsetf(std::ios::floatfield);
      // Locate the crossing on a 0.01 grid; only the Jordan eigenvalue is needed here.
      double lo = -1, hi = -1, prev = 1.0;
      for (int k = 0; k <= 100; ++k) {
        const double a = k / 100.0;
        const auto [i, j] = xz_map_instruments(a);
        const double lam = min_eig(jordan_product_choi(induced_channel(i), induced_channel(j)).hermitian_part());
        if (k > 0 && (prev >= 0.0) != (lam >= 0.0)) {
          lo = (k - 1) / 100.0;
          hi = a;
          break;
        }
        prev = lam;
      }
      out << "sign change in (" << std::fixed << std::setprecision(2) << lo << ", " << hi << ")\n";
      out.unsetf(std::ios::floatfield);
      write_report({{"command", "demo"}, {"name", demo_name}, {"config", config_json(o)}, {"rows", rows},
                    {"sign_change", {lo, hi}}},
                   c_demo.out);
      return 0;
    }
    if (scan->parsed()) {
      const CompatOptions o = options_from(c_scan);
      const ScanResult res = scan_xz(from, to, step, o);
      json rows = json::array();
      std::ostringstream csv;
      csv << "a,min_eig,verdict,margin,margin_kind,route\n";
      for (const auto& r : res.rows) {
        csv << fmt(r.a, 10) << "," << fmt(r.min_eig, 10) << "," << sdp::to_string(r.status) << "," << fmt(r.margin, 10)
            << "," << r.margin_kind << "," << r.route << "\n";
        rows.push_back({{"a", r.a},
                        {"min_eig", r.min_eig},
                        {"verdict", sdp::to_string(r.status)},
                        {"margin", r.margin},
                        {"margin_kind", r.margin_kind},
                        {"route", r.route}});
      }
      json report = {{"command", "scan"},
                     {"family", family},
                     {"grid", {{"from", from}, {"to", to}, {"step", step}}},
                     {"config", config_json(o)},
                     {"rows", rows},
                     {"sign_change", {res.sign_change_lo, res.sign_change_hi}}};
      if (format == "json") {
        out << report.dump(2) << "\n";
      } else {
        out << csv.str();
      }
      if (!c_scan.out.empty()) {
        std::ofstream f(c_scan.out);
        if (!f) throw std::runtime_error("cannot write report to '" + c_scan.out + "'");
        if (format == "json") f << report.dump(2) << "\n";
        else f << csv.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args, std::cout, std::cerr);
}

}  // namespace instro::cli
