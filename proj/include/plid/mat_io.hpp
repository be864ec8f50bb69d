#pragma once

// Matrix container: 8-byte magic, uint32 rows, uint32 cols (little-endian),
// then rows·cols row-major values. "PLIDMAT1" carries float32 payloads;
// "PLIDMATD" carries float64 and is used for checkpoints so parameters reload
// exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plid/matrix.hpp"

namespace plid::mat_io {

enum class Precision { f32, f64 };

inline constexpr char magic_f32[8] = {'P', 'L', 'I', 'D', 'M', 'A', 'T', '1'};
inline constexpr char magic_f64[8] = {'P', 'L', 'I', 'D', 'M', 'A', 'T', 'D'};

std::vector<std::uint8_t> encode(const Matrix &m, Precision precision = Precision::f32);
Matrix decode(const std::vector<std::uint8_t> &bytes, const std::string &what = "matrix");

void write(const std::filesystem::path &path, const Matrix &m, Precision precision = Precision::f32);
Matrix read(const std::filesystem::path &path);

} // namespace plid::mat_io
