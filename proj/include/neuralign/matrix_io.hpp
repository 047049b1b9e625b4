#pragma once

#include "neuralign/errors.hpp"
#include "neuralign/numeric.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neuralign::data {

enum class FormatErrc { io_failure, bad_magic, bad_rank, truncated, size_mismatch, dim_overflow };

const char* to_string(FormatErrc code);

/// Malformed or unreadable matrix file. Input error, so it is a ConfigError.
class FormatError : public ConfigError {
public:
    FormatError(FormatErrc code, const std::string& message);
    FormatErrc code() const noexcept { return code_; }

private:
    FormatErrc code_;
};

/// N-d array, row-major. Stored as float32, held as double.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> values;

    std::uint64_t element_count() const;
};

constexpr std::size_t kMaxRank = 8;

/// File layout: "NMB1", u8 ndim, ndim x u64 LE dims, row-major f32 LE payload.
/// Doubles are narrowed to float on write; NaN payload bits are kept exactly.
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// 2-d convenience wrappers; read_matrix rejects any other rank with bad_rank.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);
Tensor to_tensor(const Matrix& m);
Matrix to_matrix(const Tensor& t);

/// Exact float <-> double widening used by the format, NaN payloads included.
double widen(std::uint32_t float_bits);
std::uint32_t narrow(double value);

}  // namespace neuralign::data
