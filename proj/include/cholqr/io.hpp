#ifndef CHOLQR_IO_HPP_
#define CHOLQR_IO_HPP_

#include "cholqr/kernels.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cholqr::io {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_commas(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

inline bool parse_double(const std::string &s, double &out) {
  if (s.empty()) {
    return false;
  }
  const char *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::ifstream open_in(const std::string &path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) {
    throw ConfigError("cannot open '" + path + "' for reading");
  }
  return in;
}

inline std::ofstream open_out(const std::string &path,
                              std::ios::openmode mode = std::ios::out) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot open '" + path + "' for writing");
  }
  return out;
}

inline void put_le_u64(std::ostream &out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) {
    b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  }
  out.write(reinterpret_cast<const char *>(b.data()), 8);
}

inline std::uint64_t get_le_u64(const unsigned char *b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | b[i];
  }
  return v;
}

} // namespace detail

/// Dense numeric table from a CSV file. A first row that does not parse as
/// numbers is treated as a header and skipped; blank lines are ignored.
inline Matrix read_csv_matrix(const std::string &path,
                              std::vector<std::string> *header = nullptr) {
  std::ifstream in = detail::open_in(path, std::ios::in);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) {
      continue;
    }
    const auto fields = detail::split_commas(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      numeric = numeric && detail::parse_double(fields[c], row[c]);
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        if (header != nullptr) {
          *header = fields;
        }
        width = fields.size();
        continue;
      }
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": non-numeric field");
    }
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(width) + " fields, found " +
                        std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return out;
}

/// One row per point: features, then the target in the last column.
inline Dataset read_dataset(const std::string &path) {
  const Matrix table = read_csv_matrix(path);
  if (table.rows() == 0) {
    throw ConfigError(path + ": dataset has no rows");
  }
  if (table.cols() < 2) {
    throw ConfigError(path + ": dataset needs at least one feature column "
                             "and a target column");
  }
  if (!table.allFinite()) {
    throw ConfigError(path + ": dataset has non-finite values");
  }
  Dataset d;
  d.inputs = table.leftCols(table.cols() - 1);
  d.targets = table.col(table.cols() - 1);
  return d;
}

/// Writes with 17 significant digits so reading back is exact.
inline void write_dataset(const std::string &path, const Dataset &d,
                          bool with_header = true) {
  d.validate();
  std::ofstream out = detail::open_out(path);
  out << std::setprecision(17);
  if (with_header) {
    for (Index c = 0; c < d.dim(); ++c) {
      out << 'x' << c << ',';
    }
    out << "y\n";
  }
  for (Index r = 0; r < d.size(); ++r) {
    for (Index c = 0; c < d.dim(); ++c) {
      out << d.inputs(r, c) << ',';
    }
    out << d.targets[r] << '\n';
  }
}

inline constexpr std::string_view kKmatMagic = "KMAT1";

inline void write_kmat(const std::string &path, const Matrix &K) {
  if (K.rows() != K.cols()) {
    throw ConfigError("write_kmat: matrix must be square");
  }
  std::ofstream out = detail::open_out(path, std::ios::binary);
  out.write(kKmatMagic.data(), static_cast<std::streamsize>(kKmatMagic.size()));
  detail::put_le_u64(out, static_cast<std::uint64_t>(K.rows()));
  for (Index i = 0; i < K.rows(); ++i) {
    for (Index j = 0; j < K.cols(); ++j) {
      detail::put_le_u64(out, std::bit_cast<std::uint64_t>(K(i, j)));
    }
  }
}

/// Square matrix from either the KMAT1 binary layout or an n x n CSV,
/// chosen by the leading magic bytes.
inline Matrix read_kernel_matrix(const std::string &path) {
  std::ifstream in = detail::open_in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::size_t hdr = kKmatMagic.size() + 8;
  if (bytes.size() >= kKmatMagic.size() &&
      std::memcmp(bytes.data(), kKmatMagic.data(), kKmatMagic.size()) == 0) {
    if (bytes.size() < hdr) {
      throw ConfigError(path + ": truncated KMAT1 header");
    }
    const std::uint64_t n = detail::get_le_u64(bytes.data() + kKmatMagic.size());
    if (n > (1u << 20) || bytes.size() != hdr + 8 * n * n) {
      throw ConfigError(path + ": KMAT1 payload size does not match n=" +
                        std::to_string(n));
    }
    Matrix K(static_cast<Index>(n), static_cast<Index>(n));
    const unsigned char *p = bytes.data() + hdr;
    for (Index i = 0; i < K.rows(); ++i) {
      for (Index j = 0; j < K.cols(); ++j, p += 8) {
        K(i, j) = std::bit_cast<double>(detail::get_le_u64(p));
      }
    }
    return K;
  }
  Matrix K = read_csv_matrix(path);
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw ConfigError(path + ": kernel CSV must be a non-empty square table, got " +
                      std::to_string(K.rows()) + "x" + std::to_string(K.cols()));
  }
  return K;
}

/// 64-bit FNV-1a over the shape and the IEEE bytes of inputs and targets,
/// rendered as 16 hex digits.
inline std::string dataset_hash(const Dataset &d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(d.inputs.rows()));
  mix(static_cast<std::uint64_t>(d.inputs.cols()));
  for (Index r = 0; r < d.inputs.rows(); ++r) {
    for (Index c = 0; c < d.inputs.cols(); ++c) {
      mix(std::bit_cast<std::uint64_t>(d.inputs(r, c)));
    }
    mix(std::bit_cast<std::uint64_t>(d.targets[r]));
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

} // namespace cholqr::io

#endif // CHOLQR_IO_HPP_
