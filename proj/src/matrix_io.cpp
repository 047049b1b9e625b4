#include "neuralign/matrix_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace neuralign::data {
namespace {

constexpr char kMagic[4] = {'N', 'M', 'B', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

const char* to_string(FormatErrc code) {
    switch (code) {
        case FormatErrc::io_failure: return "io_failure";
        case FormatErrc::bad_magic: return "bad_magic";
        case FormatErrc::bad_rank: return "bad_rank";
        case FormatErrc::truncated: return "truncated";
        case FormatErrc::size_mismatch: return "size_mismatch";
        case FormatErrc::dim_overflow: return "dim_overflow";
    }
    return "unknown";
}

FormatError::FormatError(FormatErrc code, const std::string& message)
    : ConfigError(std::string(to_string(code)) + ": " + message), code_(code) {}

std::uint64_t Tensor::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

// NaNs are converted by hand: a hardware cast would quiet signalling NaNs.
double widen(std::uint32_t bits) {
    if ((bits & 0x7F800000u) == 0x7F800000u && (bits & 0x007FFFFFu) != 0) {
        const std::uint64_t sign = static_cast<std::uint64_t>(bits >> 31) << 63;
        const std::uint64_t mantissa = static_cast<std::uint64_t>(bits & 0x007FFFFFu) << 29;
        return std::bit_cast<double>(sign | 0x7FF0000000000000ull | mantissa);
    }
    return static_cast<double>(std::bit_cast<float>(bits));
}

std::uint32_t narrow(double value) {
    if (std::isnan(value)) {
        const auto bits = std::bit_cast<std::uint64_t>(value);
        std::uint32_t mantissa = static_cast<std::uint32_t>((bits >> 29) & 0x007FFFFFu);
        if (mantissa == 0) mantissa = 0x00400000u;  // low-only payload would read back as infinity
        return (static_cast<std::uint32_t>(bits >> 63) << 31) | 0x7F800000u | mantissa;
    }
    return std::bit_cast<std::uint32_t>(static_cast<float>(value));
}

std::string encode_tensor(const Tensor& t) {
    if (t.dims.empty() || t.dims.size() > kMaxRank) {
        throw FormatError(FormatErrc::bad_rank, "tensor rank " + std::to_string(t.dims.size()) + " outside 1.." +
                                                    std::to_string(kMaxRank));
    }
    if (t.values.size() != t.element_count()) {
        throw FormatError(FormatErrc::size_mismatch, "tensor holds " + std::to_string(t.values.size()) +
                                                         " values for " + std::to_string(t.element_count()) +
                                                         " cells");
    }
    std::string out(kMagic, 4);
    out.push_back(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) put_u64(out, d);
    out.reserve(out.size() + 4 * t.values.size());
    for (double v : t.values) {
        const std::uint32_t b = narrow(v);
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xFFu));
    }
    return out;
}

Tensor decode_tensor(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 5) {
        if (bytes.size() >= 4 && std::memcmp(p, kMagic, 4) != 0) throw FormatError(FormatErrc::bad_magic, "not an NMB1 file");
        throw FormatError(FormatErrc::truncated, "header shorter than 5 bytes");
    }
    if (std::memcmp(p, kMagic, 4) != 0) throw FormatError(FormatErrc::bad_magic, "not an NMB1 file");
    const std::size_t ndim = p[4];
    if (ndim == 0 || ndim > kMaxRank) {
        throw FormatError(FormatErrc::bad_rank, "rank " + std::to_string(ndim) + " outside 1.." + std::to_string(kMaxRank));
    }
    const std::size_t header = 5 + 8 * ndim;
    if (bytes.size() < header) throw FormatError(FormatErrc::truncated, "header ends before all dims");
    Tensor t;
    std::uint64_t count = 1;
    constexpr std::uint64_t kLimit = std::numeric_limits<std::uint64_t>::max() / 4;
    for (std::size_t i = 0; i < ndim; ++i) {
        const std::uint64_t d = get_u64(p + 5 + 8 * i);
        if (d != 0 && count > kLimit / d) throw FormatError(FormatErrc::dim_overflow, "dims product overflows");
        count *= d;
        t.dims.push_back(d);
    }
    const std::size_t payload = bytes.size() - header;
    if (payload % 4 != 0) throw FormatError(FormatErrc::truncated, "payload is not a whole number of floats");
    if (payload / 4 != count) {
        throw FormatError(FormatErrc::size_mismatch, "header declares " + std::to_string(count) + " values, payload has " +
                                                         std::to_string(payload / 4));
    }
    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) t.values[i] = widen(get_u32(p + header + 4 * i));
    return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    const std::string bytes = encode_tensor(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_tensor(bytes);
    } catch (const FormatError& e) {
        throw FormatError(e.code(), path.string() + ": " + (e.what() + std::strlen(to_string(e.code())) + 2));
    }
}

Tensor to_tensor(const Matrix& m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.values.assign(m.data(), m.data() + m.size());
    return t;
}

Matrix to_matrix(const Tensor& t) {
    if (t.dims.size() != 2) {
        throw FormatError(FormatErrc::bad_rank, "expected a 2-d matrix, got rank " + std::to_string(t.dims.size()));
    }
    Matrix m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
    std::copy(t.values.begin(), t.values.end(), m.data());
    return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) { write_tensor(path, to_tensor(m)); }

Matrix read_matrix(const std::filesystem::path& path) {
    const Tensor t = read_tensor(path);
    if (t.dims.size() != 2) {
        throw FormatError(FormatErrc::bad_rank, path.string() + ": expected a 2-d matrix, got rank " +
                                                    std::to_string(t.dims.size()));
    }
    return to_matrix(t);
}

}  // namespace neuralign::data
