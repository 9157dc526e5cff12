#pragma once

// Command-line front end: instrocompat {check, postprocess, complement, classify, demo, scan}.
//
// Device references are file paths or catalog names with a "catalog:" prefix:
//   catalog:id2  catalog:id:d=3  catalog:pauli  catalog:z  catalog:x
//   catalog:noisy-z:v=0.5  catalog:noisy-x:v=0.5
//   catalog:xz:a=0.7  catalog:xz:a=0.7,which=j
//   catalog:trash:p=0.3,d=2  catalog:luders:<ref>

#include <iosfwd>
#include <string>
#include <vector>

#include "instro/compat.hpp"
#include "instro/device_io.hpp"

namespace instro::cli {

/// Exit codes: 0 decided, 2 UNDECIDED, 1 usage, IO or input errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

/// Resolves a file path or catalog reference.
Device resolve_device(const std::string& ref);

struct ScanRow {
  double a = 0.0;
  double min_eig = 0.0;  // λ_min of the Jordan product Choi of the induced channels
  sdp::Status status = sdp::Status::Undecided;
  double margin = 0.0;
  std::string margin_kind;
  std::string route;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  /// First grid interval on which min_eig changes sign; both equal to -1 when there is none.
  double sign_change_lo = -1.0;
  double sign_change_hi = -1.0;
};

/// Channel-compatibility sweep over the xz family: Jordan test first, the
/// direct SDP on the induced channels when the Jordan product is not PSD.
ScanResult scan_xz(double from, double to, double step, const CompatOptions& opts = {});

}  // namespace instro::cli
