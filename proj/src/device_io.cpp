#include "instro/device_io.hpp"

#include <fstream>
#include <sstream>

namespace instro {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw DeviceFormatError("field '" + path + "': " + what);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::size_t positive_size(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  const std::string p = path.empty() ? key : path + "." + key;
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(p, "expected a positive integer");
  const auto x = v.get<long long>();
  if (x <= 0) fail(p, "expected a positive integer");
  return static_cast<std::size_t>(x);
}

cplx complex_from_json(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(path, "expected a complex number [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<std::string> labels_from_json(const json& j, const std::string& key, const json& ops_obj,
                                          const std::string& path) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it != j.end()) {
    if (!it->is_array()) fail(path + key, "expected a list of outcome labels");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const json& l = (*it)[k];
      if (l.is_string()) out.push_back(l.get<std::string>());
      else if (l.is_number_integer()) out.push_back(std::to_string(l.get<long long>()));
      else fail(path + key + "[" + std::to_string(k) + "]", "outcome labels must be strings");
    }
  } else {
    for (auto e = ops_obj.begin(); e != ops_obj.end(); ++e) out.push_back(e.key());
  }
  return out;
}

Operation operation_from_json(const json& j, std::size_t din, std::size_t dout, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object with 'kraus' and/or 'choi'");
  std::optional<std::vector<CMatrix>> kraus;
  std::optional<CMatrix> choi;
  if (auto it = j.find("kraus"); it != j.end()) {
    const std::string kp = path + ".kraus";
    if (!it->is_array()) fail(kp, "expected a list of matrices");
    std::vector<CMatrix> ks;
    for (std::size_t k = 0; k < it->size(); ++k) ks.push_back(matrix_from_json((*it)[k], kp + "[" + std::to_string(k) + "]"));
    for (std::size_t k = 0; k < ks.size(); ++k)
      if (ks[k].rows() != dout || ks[k].cols() != din) {
        std::ostringstream os;
        os << "Kraus operator is " << ks[k].rows() << "x" << ks[k].cols() << ", expected " << dout << "x" << din;
        fail(kp + "[" + std::to_string(k) + "]", os.str());
      }
    kraus = std::move(ks);
  }
  if (auto it = j.find("choi"); it != j.end()) {
    choi = matrix_from_json(*it, path + ".choi");
    if (choi->rows() != din * dout || choi->cols() != din * dout) fail(path + ".choi", "Choi matrix has the wrong shape");
  }
  try {
    if (kraus && choi) return Operation::from_both(din, dout, std::move(*kraus), std::move(*choi));
    if (kraus) return Operation::from_kraus(din, dout, std::move(*kraus));
    if (choi) return Operation::from_choi(din, dout, std::move(*choi));
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  fail(path, "operation needs 'kraus' or 'choi'");
}

}  // namespace

json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty list of rows");
  const std::size_t nr = j.size();
  if (!j[0].is_array() || j[0].empty()) fail(path + "[0]", "expected a nonempty row");
  const std::size_t nc = j[0].size();
  CMatrix m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != nc) fail(rp, "rows must all have " + std::to_string(nc) + " entries");
    for (std::size_t c = 0; c < nc; ++c) m(r, c) = complex_from_json(j[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

json to_json(const Povm& p) {
  json eff = json::object();
  for (std::size_t x = 0; x < p.size(); ++x) eff[p.outcomes()[x]] = matrix_to_json(p.effect(x));
  return {{"kind", "povm"}, {"dim_in", p.dim_in()}, {"outcomes", p.outcomes()}, {"effects", eff}};
}

json to_json(const Operation& op, std::size_t) {
  json j = json::object();
  if (op.has_kraus()) {
    json ks = json::array();
    for (const auto& k : op.kraus()) ks.push_back(matrix_to_json(k));
    j["kraus"] = std::move(ks);
  } else {
    j["choi"] = matrix_to_json(op.choi());
  }
  return j;
}

json to_json(const Instrument& ins) {
  json ops = json::object();
  for (std::size_t x = 0; x < ins.size(); ++x) ops[ins.outcomes()[x]] = to_json(ins.op(x));
  json j = {{"kind", "instrument"},     {"dim_in", ins.dim_in()}, {"dim_out", ins.dim_out()},
            {"outcomes", ins.outcomes()}, {"ops", ops}};
  if (ins.out_dims().size() > 1) j["out_dims"] = ins.out_dims();
  return j;
}

json to_json(const Dilation& d) {
  return {{"kind", "dilation"}, {"dim_anc", d.dim_anc}, {"dim_in", d.dim_in},
          {"dim_out", d.dim_out}, {"w", matrix_to_json(d.w)}, {"e", to_json(d.e)}};
}

Povm povm_from_json(const json& j) {
  const std::size_t din = positive_size(j, "dim_in", "");
  const json& eff = field(j, "effects", "");
  if (!eff.is_object()) fail("effects", "expected an object mapping outcome labels to matrices");
  const auto labels = labels_from_json(j, "outcomes", eff, "");
  std::vector<CMatrix> effects;
  for (const auto& l : labels) {
    auto it = eff.find(l);
    if (it == eff.end()) fail("effects." + l, "missing effect for declared outcome");
    CMatrix m = matrix_from_json(*it, "effects." + l);
    if (m.rows() != din || m.cols() != din) fail("effects." + l, "effect must be dim_in x dim_in");
    effects.push_back(std::move(m));
  }
  if (eff.size() != labels.size()) fail("effects", "effects and outcomes disagree");
  try {
    Povm p(din, labels, std::move(effects));
    p.validate();
    return p;
  } catch (const std::invalid_argument& e) {
    throw DeviceFormatError(std::string("invalid POVM: ") + e.what());
  }
}

Instrument instrument_from_json(const json& j) {
  const std::string kind = j.is_object() && j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>() : "";
  if (kind == "povm") return povm_as_instrument(povm_from_json(j));
  const std::size_t din = positive_size(j, "dim_in", "");
  const std::size_t dout = positive_size(j, "dim_out", "");
  DimVec od;
  if (auto it = j.find("out_dims"); it != j.end()) {
    if (!it->is_array()) fail("out_dims", "expected a list of positive integers");
    for (const auto& v : *it) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) fail("out_dims", "expected a list of positive integers");
      od.push_back(v.get<std::size_t>());
    }
    if (dim_product(od) != dout) fail("out_dims", "product must equal dim_out");
  }
  Instrument ins;
  try {
    if (kind == "channel") {
      ins = Instrument(din, dout, {"0"}, {operation_from_json(j, din, dout, "")}, od);
    } else if (kind == "instrument") {
      const json& ops = field(j, "ops", "");
      if (!ops.is_object()) fail("ops", "expected an object mapping outcome labels to operations");
      const auto labels = labels_from_json(j, "outcomes", ops, "");
      std::vector<Operation> v;
      for (const auto& l : labels) {
        auto it = ops.find(l);
        if (it == ops.end()) fail("ops." + l, "missing operation for declared outcome");
        v.push_back(operation_from_json(*it, din, dout, "ops." + l));
      }
      if (ops.size() != labels.size()) fail("ops", "ops and outcomes disagree");
      ins = Instrument(din, dout, labels, std::move(v), od);
    } else {
      fail("kind", "expected 'povm', 'channel' or 'instrument'");
    }
    ins.validate();
  } catch (const std::invalid_argument& e) {
    throw DeviceFormatError(std::string("invalid device: ") + e.what());
  }
  return ins;
}

Dilation dilation_from_json(const json& j) {
  Dilation d;
  d.dim_anc = positive_size(j, "dim_anc", "");
  d.dim_in = positive_size(j, "dim_in", "");
  d.dim_out = positive_size(j, "dim_out", "");
  d.w = matrix_from_json(field(j, "w", ""), "w");
  if (d.w.rows() != d.dim_anc * d.dim_out || d.w.cols() != d.dim_in) fail("w", "isometry has the wrong shape");
  try {
    d.e = povm_from_json(field(j, "e", ""));
  } catch (const DeviceFormatError& e) {
    throw DeviceFormatError(std::string("in 'e': ") + e.what());
  }
  if (d.e.dim_in() != d.dim_anc) fail("e.dim_in", "ancilla POVM must act on dim_anc");
  return d;
}

Device device_from_json(const json& j) {
  if (!j.is_object()) throw DeviceFormatError("device must be a JSON object");
  auto it = j.find("kind");
  if (it == j.end() || !it->is_string()) fail("kind", "missing");
  if (*it == "povm") return povm_from_json(j);
  return instrument_from_json(j);
}

Device load_device_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open device file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw DeviceFormatError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error");
  }
  try {
    return device_from_json(j);
  } catch (const DeviceFormatError& e) {
    throw DeviceFormatError(path + ": " + e.what());
  }
}

Instrument as_instrument(const Device& d) {
  if (const auto* p = std::get_if<Povm>(&d)) return povm_as_instrument(*p);
  return std::get<Instrument>(d);
}

}  // namespace instro
