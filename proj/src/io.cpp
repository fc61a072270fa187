#include "paddle/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <vector>

namespace paddle::io {

namespace {

using Bytes = std::vector<unsigned char>;

void put_le(std::ostream& out, std::uint64_t value, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(buf, bytes);
}

std::uint64_t get_le(const Bytes& data, std::uint64_t offset, int bytes) {
  std::uint64_t value = 0;
  for (int i = 0; i < bytes; ++i) {
    value |= static_cast<std::uint64_t>(data[offset + static_cast<std::uint64_t>(i)]) << (8 * i);
  }
  return value;
}

Bytes slurp(std::istream& in) {
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

void append_number(std::string& line, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  line.append(buf, res.ptr);
}

}  // namespace

void write_matrix(std::ostream& out, const Matrix& M) {
  detail::require_nonempty(M, "matrix");
  detail::require_finite(M, "matrix");
  out.write(kMatrixMagic, 4);
  put_le(out, kMatrixVersion, 4);
  put_le(out, static_cast<std::uint64_t>(M.rows()), 8);
  put_le(out, static_cast<std::uint64_t>(M.cols()), 8);
  const double* values = M.data();  // column-major storage
  for (Index i = 0; i < M.size(); ++i) put_le(out, std::bit_cast<std::uint64_t>(values[i]), 8);
}

Matrix read_matrix(std::istream& in) {
  const Bytes data = slurp(in);
  const std::uint64_t size = data.size();
  if (size < 4 || std::memcmp(data.data(), kMatrixMagic, 4) != 0) {
    throw FormatError("matrix file: bad magic (expected PADL)", 0);
  }
  if (size < 8) throw FormatError("matrix file: truncated version field", size);
  const auto version = static_cast<std::uint32_t>(get_le(data, 4, 4));
  if (version != kMatrixVersion) {
    throw FormatError("matrix file: unsupported version " + std::to_string(version), 4);
  }
  if (size < kMatrixHeaderBytes) throw FormatError("matrix file: truncated header", size);
  const std::uint64_t rows = get_le(data, 8, 8);
  const std::uint64_t cols = get_le(data, 16, 8);
  if (rows == 0 || cols == 0) throw FormatError("matrix file: empty shape", 8);
  constexpr std::uint64_t kMaxEntries = (std::uint64_t{1} << 60) / 8;
  if (rows > kMaxEntries / cols) throw FormatError("matrix file: shape overflows", 8);
  const std::uint64_t payload = rows * cols * 8;
  if (size < kMatrixHeaderBytes + payload) {
    throw FormatError("matrix file: truncated payload (" + std::to_string(rows) + "x" +
                          std::to_string(cols) + ")",
                      size);
  }
  if (size > kMatrixHeaderBytes + payload) {
    throw FormatError("matrix file: trailing bytes after payload", kMatrixHeaderBytes + payload);
  }
  Matrix M(static_cast<Index>(rows), static_cast<Index>(cols));
  double* values = M.data();
  for (std::uint64_t i = 0; i < rows * cols; ++i) {
    const std::uint64_t offset = kMatrixHeaderBytes + 8 * i;
    values[i] = std::bit_cast<double>(get_le(data, offset, 8));
    if (!std::isfinite(values[i])) throw FormatError("matrix file: non-finite value", offset);
  }
  return M;
}

void write_matrix(const std::filesystem::path& path, const Matrix& M) {
  auto out = open_out(path);
  write_matrix(out, M);
  finish(out, path);
}

Matrix read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& M) {
  detail::require_finite(M, "matrix");
  auto out = open_out(path);
  std::string line;
  for (Index i = 0; i < M.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) line.push_back(',');
      append_number(line, M(i, j));
    }
    line.push_back('\n');
    out << line;
  }
  finish(out, path);
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Bytes data = slurp(in);
  const char* const begin = reinterpret_cast<const char*>(data.data());
  const char* const end = begin + data.size();

  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  const char* p = begin;
  while (p < end) {
    const char* eol = std::find(p, end, '\n');
    const char* line_end = (eol > p && eol[-1] == '\r') ? eol - 1 : eol;
    if (line_end != p) {
      Index count = 0;
      const char* q = p;
      while (true) {
        while (q < line_end && *q == ' ') ++q;
        double v = 0.0;
        const auto res = std::from_chars(q, line_end, v);
        if (res.ec != std::errc() || !std::isfinite(v)) {
          throw FormatError("csv: bad number", static_cast<std::uint64_t>(q - begin));
        }
        values.push_back(v);
        ++count;
        q = res.ptr;
        while (q < line_end && *q == ' ') ++q;
        if (q == line_end) break;
        if (*q != ',') throw FormatError("csv: expected ','", static_cast<std::uint64_t>(q - begin));
        ++q;
      }
      if (cols >= 0 && count != cols) {
        throw FormatError("csv: ragged row " + std::to_string(rows),
                          static_cast<std::uint64_t>(p - begin));
      }
      cols = count;
      ++rows;
    }
    p = eol < end ? eol + 1 : end;
  }
  if (rows == 0) throw FormatError("csv: no data", 0);

  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) M(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  }
  return M;
}

Matrix read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Bytes data = slurp(in);
  std::uint64_t pos = 0;

  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    const std::uint64_t start = pos;
    std::uint64_t value = 0;
    while (pos < data.size() && std::isdigit(data[pos])) {
      value = value * 10 + static_cast<std::uint64_t>(data[pos] - '0');
      if (value > (1u << 24)) throw FormatError(std::string("pgm: ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pgm: expected ") + what, start);
    return value;
  };

  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '2')) {
    throw FormatError("pgm: bad magic (expected P5 or P2)", 0);
  }
  const bool binary = data[1] == '5';
  pos = 2;
  const std::uint64_t width = read_uint("width");
  const std::uint64_t height = read_uint("height");
  const std::uint64_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw FormatError("pgm: empty image", 2);
  if (maxval == 0 || maxval > 65535) throw FormatError("pgm: maxval out of range", pos);

  Matrix image(static_cast<Index>(height), static_cast<Index>(width));
  if (binary) {
    if (pos >= data.size() || !std::isspace(data[pos])) {
      throw FormatError("pgm: expected whitespace after maxval", pos);
    }
    ++pos;
    const std::uint64_t bpp = maxval > 255 ? 2 : 1;
    if (data.size() < pos + width * height * bpp) {
      throw FormatError("pgm: truncated raster", data.size());
    }
    for (std::uint64_t r = 0; r < height; ++r) {
      for (std::uint64_t c = 0; c < width; ++c) {
        const std::uint64_t at = pos + (r * width + c) * bpp;
        const unsigned v = bpp == 1 ? data[at] : (unsigned{data[at]} << 8) | data[at + 1];
        image(static_cast<Index>(r), static_cast<Index>(c)) = static_cast<double>(v);
      }
    }
  } else {
    for (std::uint64_t r = 0; r < height; ++r) {
      for (std::uint64_t c = 0; c < width; ++c) {
        image(static_cast<Index>(r), static_cast<Index>(c)) =
            static_cast<double>(read_uint("pixel"));
      }
    }
  }
  return image;
}

Matrix read_any(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".csv") return read_csv_matrix(path);
  return read_matrix(path);
}

TileLayout tile_layout(Index atoms, Index tile_rows, Index tile_cols) {
  if (atoms < 1 || tile_rows < 1 || tile_cols < 1) {
    throw ContractViolation("tile_layout: atoms and tile sizes must be positive");
  }
  TileLayout layout;
  auto per_row = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(atoms))));
  while (per_row * per_row < atoms) ++per_row;
  while ((per_row - 1) * (per_row - 1) >= atoms) --per_row;
  layout.tiles_per_row = per_row;
  layout.tile_grid_rows = (atoms + per_row - 1) / per_row;
  layout.width = per_row * tile_cols + (per_row - 1);
  layout.height = layout.tile_grid_rows * tile_rows + (layout.tile_grid_rows - 1);
  return layout;
}

TileLayout write_pgm_tiles(const Matrix& D, Index tile_rows, Index tile_cols,
                           const std::filesystem::path& path) {
  if (D.rows() != tile_rows * tile_cols) {
    throw ContractViolation("write_pgm_tiles: atoms have length " + std::to_string(D.rows()) +
                            ", expected " + std::to_string(tile_rows) + "x" +
                            std::to_string(tile_cols) + " = " +
                            std::to_string(tile_rows * tile_cols));
  }
  detail::require_finite(D, "dictionary");
  const TileLayout layout = tile_layout(D.cols(), tile_rows, tile_cols);
  std::vector<unsigned char> raster(static_cast<std::size_t>(layout.width * layout.height), 0);

  for (Index k = 0; k < D.cols(); ++k) {
    const Index y0 = (k / layout.tiles_per_row) * (tile_rows + 1);
    const Index x0 = (k % layout.tiles_per_row) * (tile_cols + 1);
    const double lo = D.col(k).minCoeff();
    const double hi = D.col(k).maxCoeff();
    for (Index c = 0; c < tile_cols; ++c) {
      for (Index r = 0; r < tile_rows; ++r) {
        const double v = D(c * tile_rows + r, k);
        const double level = hi > lo ? std::round(255.0 * (v - lo) / (hi - lo)) : 0.0;
        raster[static_cast<std::size_t>((y0 + r) * layout.width + x0 + c)] =
            static_cast<unsigned char>(level);
      }
    }
  }

  auto out = open_out(path);
  out << "P5\n" << layout.width << ' ' << layout.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  finish(out, path);
  return layout;
}

void write_trace_csv(std::ostream& out, const TrainTrace<double>& trace) {
  const HyperParams& hp = trace.hp;
  std::string line;
  auto kv = [&](const char* key, double value) {
    line += key;
    line += '=';
    append_number(line, value);
  };
  line = "# seed=" + std::to_string(trace.seed) + "\n";
  line += "# d=" + std::to_string(trace.signal_dim) + ",n=" + std::to_string(trace.examples) +
          ",k=" + std::to_string(trace.atoms) + "\n# ";
  kv("tau", hp.tau);
  line += ',';
  kv("eta", hp.eta);
  line += ',';
  kv("mu", hp.mu);
  line += ',';
  kv("rtol", hp.rtol);
  line += ",t_max=" + std::to_string(hp.t_max) + ",history=" + std::to_string(hp.history_h) +
          ",inner_max_iter=" + std::to_string(hp.inner_max_iter) + ",";
  kv("inner_rtol", hp.inner_rtol);
  line += ",min_usage=" + std::to_string(hp.min_usage) + "\n# ";
  kv("initial_energy", trace.initial_energy);
  line += "\n# stop=";
  line += to_string(trace.stop);
  line += "\n";
  line += kTraceHeader;
  line += '\n';
  out << line;

  for (const auto& r : trace.records) {
    line = std::to_string(r.t);
    for (double v : {r.energy.total, r.energy.reconstruction, r.energy.coding, r.energy.l1,
                     r.energy.l2, r.avg_support}) {
      line += ',';
      append_number(line, v);
    }
    line += ',' + std::to_string(r.atoms_replaced) + '\n';
    out << line;
  }
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace<double>& trace) {
  auto out = open_out(path);
  write_trace_csv(out, trace);
  finish(out, path);
}

}  // namespace paddle::io
