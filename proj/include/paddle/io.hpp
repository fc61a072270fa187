#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "paddle/trainer.hpp"
#include "paddle/types.hpp"

namespace paddle::io {

// Binary matrix file, all integers and values little-endian:
//   offset 0   "PADL"
//   offset 4   uint32 format version (1)
//   offset 8   uint64 rows
//   offset 16  uint64 cols
//   offset 24  rows*cols float64, column-major
inline constexpr char kMatrixMagic[4] = {'P', 'A', 'D', 'L'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::uint64_t kMatrixHeaderBytes = 24;

void write_matrix(std::ostream& out, const Matrix& M);
Matrix read_matrix(std::istream& in);
void write_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix read_matrix(const std::filesystem::path& path);

/// Comma separated, one matrix row per line, no header.
void write_csv_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix read_csv_matrix(const std::filesystem::path& path);

/// Binary (P5) or ASCII (P2) graymap as a height x width matrix of raw
/// intensities.
Matrix read_pgm(const std::filesystem::path& path);

/// Reads by extension: .pgm, .csv, anything else as a matrix file.
Matrix read_any(const std::filesystem::path& path);

struct TileLayout {
  Index tiles_per_row = 0;
  Index tile_grid_rows = 0;
  Index width = 0;   ///< pixels
  Index height = 0;  ///< pixels
};

/// ceil(sqrt(K)) tiles per row, rows filled first, one-pixel separators
/// between neighbouring tiles.
TileLayout tile_layout(Index atoms, Index tile_rows, Index tile_cols);

/// Renders every column of D as a tile_rows x tile_cols tile (column-major
/// pixels) in a binary P5 graymap. Each atom is min-max scaled to 0..255
/// on its own; a constant atom renders as 0. Separators and unused grid
/// cells are black.
TileLayout write_pgm_tiles(const Matrix& D, Index tile_rows, Index tile_cols,
                           const std::filesystem::path& path);

/// Trace as CSV: '#'-prefixed metadata lines, then the column header
/// `t,total,recon,coding,l1,l2,avg_support,atoms_replaced` and one row
/// per outer iteration.
void write_trace_csv(std::ostream& out, const TrainTrace<double>& trace);
void write_trace_csv(const std::filesystem::path& path, const TrainTrace<double>& trace);

inline constexpr const char* kTraceHeader =
    "t,total,recon,coding,l1,l2,avg_support,atoms_replaced";

}  // namespace paddle::io
