#include "instro/devices.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace instro {

namespace {

void check_unique(const std::vector<std::string>& labels, const char* what) {
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second) throw ValidationError(std::string(what) + ": duplicate outcome label '" + l + "'");
}

std::vector<std::string> default_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(std::to_string(k));
  return out;
}

std::size_t find_label(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw std::out_of_range("unknown outcome label '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

double scale_of(const CMatrix& m) { return std::max(1.0, m.max_abs()); }

}  // namespace

// ---------------------------------------------------------------- Povm

Povm::Povm(std::size_t dim_in, std::vector<std::string> outcomes, std::vector<CMatrix> effects)
    : dim_in_(dim_in), outcomes_(std::move(outcomes)), effects_(std::move(effects)) {
  if (dim_in_ == 0) throw DimensionError("Povm: dim_in must be positive");
  if (outcomes_.size() != effects_.size()) throw DimensionError("Povm: outcome and effect counts differ");
  if (effects_.empty()) throw ValidationError("Povm: at least one outcome is required");
  for (const auto& e : effects_)
    if (e.rows() != dim_in_ || e.cols() != dim_in_) throw DimensionError("Povm: effect has the wrong shape");
  check_unique(outcomes_, "Povm");
}

Povm::Povm(std::vector<CMatrix> effects) {
  const std::size_t d = effects.empty() ? 0 : effects.front().rows();
  auto labels = default_labels(effects.size());
  *this = Povm(d, std::move(labels), std::move(effects));
}

const CMatrix& Povm::effect(const std::string& label) const { return effects_[index_of(label)]; }

std::size_t Povm::index_of(const std::string& label) const { return find_label(outcomes_, label); }

void Povm::validate(const Tolerances& tol) const {
  CMatrix sum(dim_in_, dim_in_);
  for (std::size_t x = 0; x < effects_.size(); ++x) {
    const auto& e = effects_[x];
    if (!e.is_hermitian(tol.herm * scale_of(e)))
      throw ValidationError("Povm: effect '" + outcomes_[x] + "' is not Hermitian");
    if (min_eig(e, tol.herm * scale_of(e)) < -tol.psd)
      throw ValidationError("Povm: effect '" + outcomes_[x] + "' is not positive semidefinite");
    sum += e;
  }
  if (max_abs_diff(sum, CMatrix::identity(dim_in_)) > tol.eq)
    throw ValidationError("Povm: effects do not sum to the identity");
}

bool Povm::is_valid(const Tolerances& tol) const {
  try {
    validate(tol);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool Povm::is_sharp(double tol) const {
  for (const auto& e : effects_)
    if (max_abs_diff(e * e, e) > tol) return false;
  return true;
}

// ---------------------------------------------------------------- Operation

Operation Operation::from_kraus(std::size_t dim_in, std::size_t dim_out, std::vector<CMatrix> kraus) {
  if (dim_in == 0 || dim_out == 0) throw DimensionError("Operation: dimensions must be positive");
  for (const auto& k : kraus)
    if (k.rows() != dim_out || k.cols() != dim_in) {
      std::ostringstream os;
      os << "Operation: Kraus operator is " << k.rows() << "x" << k.cols() << ", expected " << dim_out << "x"
         << dim_in;
      throw DimensionError(os.str());
    }
  Operation op;
  op.dim_in_ = dim_in;
  op.dim_out_ = dim_out;
  op.choi_ = choi_from_kraus(kraus, dim_in, dim_out);
  op.kraus_ = std::move(kraus);
  return op;
}

Operation Operation::from_kraus(std::vector<CMatrix> kraus) {
  if (kraus.empty()) throw DimensionError("Operation: cannot infer dimensions from an empty Kraus list");
  const std::size_t din = kraus.front().cols(), dout = kraus.front().rows();
  return from_kraus(din, dout, std::move(kraus));
}

Operation Operation::from_choi(std::size_t dim_in, std::size_t dim_out, CMatrix choi) {
  if (dim_in == 0 || dim_out == 0) throw DimensionError("Operation: dimensions must be positive");
  if (choi.rows() != dim_in * dim_out || choi.cols() != dim_in * dim_out)
    throw DimensionError("Operation: Choi matrix has the wrong shape");
  if (!choi.is_hermitian(kHermTol * scale_of(choi))) throw ValidationError("Operation: Choi matrix is not Hermitian");
  Operation op;
  op.dim_in_ = dim_in;
  op.dim_out_ = dim_out;
  op.choi_ = choi.hermitian_part();
  return op;
}

Operation Operation::from_both(std::size_t dim_in, std::size_t dim_out, std::vector<CMatrix> kraus, CMatrix choi,
                               double tol) {
  Operation op = from_kraus(dim_in, dim_out, std::move(kraus));
  if (choi.rows() != op.choi_.rows() || choi.cols() != op.choi_.cols())
    throw DimensionError("Operation: Choi matrix has the wrong shape");
  if (max_abs_diff(choi, op.choi_) > tol)
    throw ValidationError("Operation: Kraus and Choi representations disagree");
  return op;
}

Operation Operation::zero(std::size_t dim_in, std::size_t dim_out) { return from_kraus(dim_in, dim_out, {}); }

std::vector<CMatrix> Operation::kraus(double rank_tol) const {
  if (kraus_) return *kraus_;
  return kraus_of(choi_, dim_in_, dim_out_, rank_tol);
}

std::size_t Operation::kraus_rank(double rank_tol) const { return psd_rank(choi_, rank_tol); }

bool Operation::is_zero(double tol) const { return choi_.max_abs() <= tol; }

// ---------------------------------------------------------------- Instrument

Instrument::Instrument(std::size_t dim_in, std::size_t dim_out, std::vector<std::string> outcomes,
                       std::vector<Operation> ops, DimVec out_dims)
    : dim_in_(dim_in), dim_out_(dim_out), out_dims_(std::move(out_dims)), outcomes_(std::move(outcomes)),
      ops_(std::move(ops)) {
  if (dim_in_ == 0 || dim_out_ == 0) throw DimensionError("Instrument: dimensions must be positive");
  if (outcomes_.size() != ops_.size()) throw DimensionError("Instrument: outcome and operation counts differ");
  if (ops_.empty()) throw ValidationError("Instrument: at least one outcome is required");
  for (const auto& op : ops_)
    if (op.dim_in() != dim_in_ || op.dim_out() != dim_out_)
      throw DimensionError("Instrument: operation dimensions do not match the instrument");
  if (out_dims_.empty()) out_dims_ = {dim_out_};
  if (dim_product(out_dims_) != dim_out_) throw DimensionError("Instrument: out_dims product differs from dim_out");
  check_unique(outcomes_, "Instrument");
}

Instrument Instrument::channel(const Operation& op) {
  return Instrument(op.dim_in(), op.dim_out(), {"0"}, {op});
}

const Operation& Instrument::op(const std::string& label) const { return ops_[index_of(label)]; }

std::size_t Instrument::index_of(const std::string& label) const { return find_label(outcomes_, label); }

void Instrument::validate(const Tolerances& tol) const {
  CMatrix total(dim_in_ * dim_out_, dim_in_ * dim_out_);
  for (std::size_t x = 0; x < ops_.size(); ++x) {
    const auto& j = ops_[x].choi();
    if (min_eig(j, tol.herm * scale_of(j)) < -tol.psd)
      throw ValidationError("Instrument: operation '" + outcomes_[x] + "' is not completely positive");
    total += j;
  }
  const CMatrix marg = partial_trace(total, {dim_in_, dim_out_}, {0});
  if (max_abs_diff(marg, CMatrix::identity(dim_in_)) > tol.eq)
    throw ValidationError("Instrument: operations do not sum to a trace-preserving map");
}

bool Instrument::is_valid(const Tolerances& tol) const {
  try {
    validate(tol);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// ---------------------------------------------------------------- State

State::State(CMatrix rho, const Tolerances& tol) : rho_(std::move(rho)) {
  if (!rho_.is_square() || rho_.empty()) throw DimensionError("State: density matrix must be square and nonempty");
  if (!rho_.is_hermitian(tol.herm * scale_of(rho_))) throw ValidationError("State: density matrix is not Hermitian");
  if (std::abs(rho_.trace() - 1.0) > tol.eq) throw ValidationError("State: trace differs from 1");
  if (min_eig(rho_, tol.herm * scale_of(rho_)) < -tol.psd)
    throw ValidationError("State: density matrix is not positive semidefinite");
  rho_ = rho_.hermitian_part();
}

// ---------------------------------------------------------------- conversions

CMatrix choi_of(const Operation& op) { return op.choi(); }

CMatrix choi_from_kraus(const std::vector<CMatrix>& kraus, std::size_t dim_in, std::size_t dim_out) {
  const std::size_t n = dim_in * dim_out;
  CMatrix j(n, n);
  for (const auto& k : kraus) {
    if (k.rows() != dim_out || k.cols() != dim_in) throw DimensionError("choi_from_kraus: Kraus shape mismatch");
    const CMatrix v = vec(k);
    for (std::size_t r = 0; r < n; ++r) {
      const cplx vr = v(r, 0);
      if (vr == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) j(r, c) += vr * std::conj(v(c, 0));
    }
  }
  return j;
}

std::vector<CMatrix> kraus_of(const CMatrix& choi, std::size_t dim_in, std::size_t dim_out, double rank_tol,
                              double psd_tol) {
  if (choi.rows() != dim_in * dim_out || !choi.is_square()) throw DimensionError("kraus_of: Choi shape mismatch");
  const EigenSystem es = herm_eig(choi);
  std::vector<CMatrix> out;
  if (!es.values.empty() && es.values.back() < -psd_tol * std::max(1.0, std::abs(es.values.front())))
    throw ValidationError("kraus_of: Choi matrix is not positive semidefinite");
  for (std::size_t k = 0; k < es.values.size(); ++k) {
    if (es.values[k] <= rank_tol) break;
    out.push_back(unvec(es.vectors.col(k) * std::sqrt(es.values[k]), dim_out, dim_in));
  }
  return out;
}

CMatrix apply_choi(const CMatrix& choi, std::size_t dim_in, std::size_t dim_out, const CMatrix& rho) {
  if (rho.rows() != dim_in || rho.cols() != dim_in) throw DimensionError("apply: input state has the wrong shape");
  if (choi.rows() != dim_in * dim_out) throw DimensionError("apply: Choi matrix has the wrong shape");
  CMatrix out(dim_out, dim_out);
  for (std::size_t i = 0; i < dim_in; ++i)
    for (std::size_t j = 0; j < dim_in; ++j) {
      const cplx r = rho(j, i);
      if (r == 0.0) continue;
      for (std::size_t a = 0; a < dim_out; ++a)
        for (std::size_t b = 0; b < dim_out; ++b) out(a, b) += r * choi(j * dim_out + a, i * dim_out + b);
    }
  return out;
}

CMatrix apply(const Operation& op, const CMatrix& rho) {
  if (rho.rows() != op.dim_in() || rho.cols() != op.dim_in())
    throw DimensionError("apply: input state has the wrong shape");
  if (op.has_kraus()) {
    CMatrix out(op.dim_out(), op.dim_out());
    for (const auto& k : op.kraus()) out += k * rho * k.adjoint();
    return out;
  }
  return apply_choi(op.choi(), op.dim_in(), op.dim_out(), rho);
}

CMatrix induced_effect(const Operation& op) {
  return partial_trace(op.choi(), {op.dim_in(), op.dim_out()}, {0}).transpose();
}

Povm induced_povm(const Instrument& ins) {
  std::vector<CMatrix> effects;
  for (const auto& op : ins.ops()) effects.push_back(induced_effect(op).hermitian_part());
  return Povm(ins.dim_in(), ins.outcomes(), std::move(effects));
}

QChannel induced_channel(const Instrument& ins) {
  if (ins.size() == 1) return ins.op(0);
  CMatrix total(ins.dim_in() * ins.dim_out(), ins.dim_in() * ins.dim_out());
  bool all_kraus = true;
  for (const auto& op : ins.ops()) {
    total += op.choi();
    all_kraus = all_kraus && op.has_kraus();
  }
  if (all_kraus) {
    std::vector<CMatrix> ks;
    for (const auto& op : ins.ops())
      for (auto& k : op.kraus()) ks.push_back(std::move(k));
    return Operation::from_kraus(ins.dim_in(), ins.dim_out(), std::move(ks));
  }
  return Operation::from_choi(ins.dim_in(), ins.dim_out(), std::move(total));
}

Instrument luders_instrument(const Povm& a) {
  std::vector<Operation> ops;
  for (const auto& e : a.effects()) ops.push_back(Operation::from_kraus(a.dim_in(), a.dim_in(), {sqrt_psd(e)}));
  return Instrument(a.dim_in(), a.dim_in(), a.outcomes(), std::move(ops));
}

Instrument povm_as_instrument(const Povm& a) {
  std::vector<Operation> ops;
  for (const auto& e : a.effects()) ops.push_back(Operation::from_choi(a.dim_in(), 1, e.transpose()));
  return Instrument(a.dim_in(), 1, a.outcomes(), std::move(ops));
}

CMatrix link_product(const CMatrix& first, const CMatrix& second, std::size_t dim_in, std::size_t dim_mid,
                     std::size_t dim_out) {
  if (first.rows() != dim_in * dim_mid || !first.is_square())
    throw DimensionError("link_product: first Choi has the wrong shape");
  if (second.rows() != dim_mid * dim_out || !second.is_square())
    throw DimensionError("link_product: second Choi has the wrong shape");
  CMatrix out(dim_in * dim_out, dim_in * dim_out);
  for (std::size_t i = 0; i < dim_in; ++i)
    for (std::size_t j = 0; j < dim_in; ++j)
      for (std::size_t a = 0; a < dim_mid; ++a)
        for (std::size_t b = 0; b < dim_mid; ++b) {
          const cplx f = first(i * dim_mid + b, j * dim_mid + a);
          if (f == 0.0) continue;
          for (std::size_t c = 0; c < dim_out; ++c)
            for (std::size_t e = 0; e < dim_out; ++e)
              out(i * dim_out + c, j * dim_out + e) += f * second(b * dim_out + c, a * dim_out + e);
        }
  return out;
}

Operation compose(const Operation& second, const Operation& first) {
  if (first.dim_out() != second.dim_in()) throw DimensionError("compose: intermediate dimensions do not match");
  if (first.has_kraus() && second.has_kraus()) {
    std::vector<CMatrix> ks;
    for (const auto& l : second.kraus())
      for (const auto& k : first.kraus()) ks.push_back(l * k);
    return Operation::from_kraus(first.dim_in(), second.dim_out(), std::move(ks));
  }
  return Operation::from_choi(first.dim_in(), second.dim_out(),
                              link_product(first.choi(), second.choi(), first.dim_in(), first.dim_out(),
                                           second.dim_out()));
}

Operation tensor_operations(const Operation& a, const Operation& b) {
  const std::size_t din = a.dim_in() * b.dim_in(), dout = a.dim_out() * b.dim_out();
  if (a.has_kraus() && b.has_kraus()) {
    std::vector<CMatrix> ks;
    for (const auto& ka : a.kraus())
      for (const auto& kb : b.kraus()) ks.push_back(tensor(ka, kb));
    return Operation::from_kraus(din, dout, std::move(ks));
  }
  const CMatrix j = permute_factors(tensor(a.choi(), b.choi()), {a.dim_in(), a.dim_out(), b.dim_in(), b.dim_out()},
                                    {0, 2, 1, 3});
  return Operation::from_choi(din, dout, j);
}

Instrument tensor_instruments(const Instrument& i, const Instrument& j) {
  std::vector<std::string> labels;
  std::vector<Operation> ops;
  for (std::size_t x = 0; x < i.size(); ++x)
    for (std::size_t y = 0; y < j.size(); ++y) {
      labels.push_back(pair_label(i.outcomes()[x], j.outcomes()[y]));
      ops.push_back(tensor_operations(i.op(x), j.op(y)));
    }
  DimVec od = i.out_dims();
  od.insert(od.end(), j.out_dims().begin(), j.out_dims().end());
  return Instrument(i.dim_in() * j.dim_in(), i.dim_out() * j.dim_out(), std::move(labels), std::move(ops),
                    std::move(od));
}

Instrument marginal(const Instrument& joint, Side side) {
  if (joint.out_dims().size() != 2)
    throw ValidationError("marginal: joint instrument needs output factorization [dK, dV]");
  const std::size_t dk = joint.out_dims()[0], dv = joint.out_dims()[1];
  const std::size_t din = joint.dim_in();
  const std::size_t keep_out = side == Side::First ? dk : dv;
  std::vector<std::string> labels;
  std::map<std::string, CMatrix> sums;
  for (std::size_t z = 0; z < joint.size(); ++z) {
    const auto [x, y] = split_pair_label(joint.outcomes()[z]);
    const std::string& key = side == Side::First ? x : y;
    if (!sums.count(key)) {
      labels.push_back(key);
      sums.emplace(key, CMatrix(din * keep_out, din * keep_out));
    }
    sums[key] += partial_trace(joint.op(z).choi(), {din, dk, dv}, {0, side == Side::First ? 1u : 2u});
  }
  std::vector<Operation> ops;
  for (const auto& l : labels) ops.push_back(Operation::from_choi(din, keep_out, sums[l]));
  return Instrument(din, keep_out, std::move(labels), std::move(ops));
}

double choi_distance(const Instrument& a, const Instrument& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out())
    throw DimensionError("devices_equal: dimensions differ");
  if (a.size() != b.size()) throw DimensionError("devices_equal: outcome counts differ");
  double d = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    const std::size_t y = b.index_of(a.outcomes()[x]);
    d = std::max(d, frobenius_distance(a.op(x).choi(), b.op(y).choi()));
  }
  return d;
}

bool devices_equal(const Instrument& a, const Instrument& b, double tol) {
  for (const auto& l : a.outcomes())
    if (std::find(b.outcomes().begin(), b.outcomes().end(), l) == b.outcomes().end()) return false;
  return choi_distance(a, b) <= tol;
}

bool devices_equal(const Povm& a, const Povm& b, double tol) {
  if (a.dim_in() != b.dim_in() || a.size() != b.size()) throw DimensionError("devices_equal: POVM shapes differ");
  for (std::size_t x = 0; x < a.size(); ++x) {
    auto it = std::find(b.outcomes().begin(), b.outcomes().end(), a.outcomes()[x]);
    if (it == b.outcomes().end()) return false;
    if (frobenius_distance(a.effect(x), b.effect(static_cast<std::size_t>(it - b.outcomes().begin()))) > tol)
      return false;
  }
  return true;
}

std::string pair_label(const std::string& x, const std::string& y) { return x + "|" + y; }

std::pair<std::string, std::string> split_pair_label(const std::string& label) {
  const auto p = label.find('|');
  if (p == std::string::npos) throw ValidationError("outcome label '" + label + "' is not an 'x|y' pair");
  return {label.substr(0, p), label.substr(p + 1)};
}

}  // namespace instro
