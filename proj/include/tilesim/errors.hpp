#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilesim {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metadata/LUT/config field is outside its bit width.
struct FieldRangeError : SimError {
  using SimError::SimError;
};

// An immediate does not fit the instruction format it was asked to use.
struct EncodingRangeError : SimError {
  using SimError::SimError;
};

struct ConfigError : SimError {
  using SimError::SimError;
};

// Assembly diagnostics carry the 1-based source line.
struct AsmError : SimError {
  AsmError(int line, const std::string& what)
      : SimError("line " + std::to_string(line) + ": " + what), line(line) {}
  int line = 0;
};

// Matrix Market parse diagnostics carry the 1-based source line.
struct MatrixParseError : SimError {
  MatrixParseError(int line, const std::string& what)
      : SimError("line " + std::to_string(line) + ": " + what), line(line) {}
  int line = 0;
};

struct DimensionMismatchError : SimError {
  using SimError::SimError;
};

// A tile's data or instruction footprint exceeds its memory budget.
struct CapacityError : SimError {
  using SimError::SimError;
};

struct SingularMatrixError : SimError {
  using SimError::SimError;
};

struct NotLowerTriangularError : SimError {
  using SimError::SimError;
};

struct NotSymmetricError : SimError {
  using SimError::SimError;
};

struct LoadTimeoutError : SimError {
  using SimError::SimError;
};

// Snapshot of a non-idle tile taken when the watchdog fires.
struct StuckTileInfo {
  unsigned row = 0;
  unsigned col = 0;
  int mode = 0;  // TileMode as int to keep this header light
  uint32_t pc = 0;
  size_t inq_size = 0;
  size_t outq_size = 0;
};

struct DeadlockSuspectedError : SimError {
  DeadlockSuspectedError(const std::string& what, std::vector<StuckTileInfo> tiles)
      : SimError(what), stuck_tiles(std::move(tiles)) {}
  std::vector<StuckTileInfo> stuck_tiles;
};

// A tile halted on a fatal condition (bad instruction, bad access, ...).
struct TileFaultError : SimError {
  TileFaultError(const std::string& what, unsigned row, unsigned col, uint32_t pc)
      : SimError(what), row(row), col(col), pc(pc) {}
  unsigned row = 0;
  unsigned col = 0;
  uint32_t pc = 0;
};

}  // namespace tilesim
