#pragma once

// JSON device format. Complex numbers are [re, im] pairs, matrices are lists
// of rows. Kinds:
//   {"kind":"povm","dim_in":2,"outcomes":["0","1"],"effects":{"0":M,"1":M}}
//   {"kind":"channel","dim_in":2,"dim_out":2,"kraus":[M,...]}            (or "choi":M)
//   {"kind":"instrument","dim_in":2,"dim_out":2,"outcomes":[...],
//    "ops":{"0":{"kraus":[M,...]},...},"out_dims":[2,1]}              (out_dims optional)
//   {"kind":"dilation","dim_anc":n,"dim_in":d,"dim_out":k,"w":M,"e":<povm>}
// An operation may carry "kraus", "choi" or both.

#include <stdexcept>
#include <string>
#include <variant>

#include "instro/devices.hpp"
#include "instro/dilation.hpp"
#include "json.hpp"

namespace instro {

using json = nlohmann::json;

/// Malformed device data; the message names the offending field path.
class DeviceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json matrix_to_json(const CMatrix& m);
/// `path` prefixes error messages, e.g. "ops.0.kraus[1]".
CMatrix matrix_from_json(const json& j, const std::string& path = "matrix");

json to_json(const Povm& p);
json to_json(const Operation& op, std::size_t outcome_count = 0);
json to_json(const Instrument& ins);
json to_json(const Dilation& d);

Povm povm_from_json(const json& j);
Instrument instrument_from_json(const json& j);
Dilation dilation_from_json(const json& j);

using Device = std::variant<Povm, Instrument>;

/// Parses any device kind; channels become one-outcome instruments.
Device device_from_json(const json& j);
/// Reads and parses a device file; parse errors report line and column.
Device load_device_file(const std::string& path);

/// POVMs are converted with povm_as_instrument.
Instrument as_instrument(const Device& d);

}  // namespace instro
