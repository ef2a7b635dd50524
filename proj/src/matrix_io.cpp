#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>

#include "distkm/error.hpp"
#include "distkm/gram.hpp"
#include "distkm/json_io.hpp"

namespace distkm {

namespace {

constexpr char kMagic[4] = {'D', 'G', 'R', 'M'};
constexpr std::size_t kHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const MatrixFile& m) {
    if (m.values.size() != m.n * m.n) throw InputError("encode_matrix: expected n*n values");
    if (m.n > 0xFFFFFFFFu) throw InputError("encode_matrix: n too large");
    std::vector<std::uint8_t> out;
    out.reserve(kHeader + 8 * m.values.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(m.n));
    out.push_back(m.mode);
    out.push_back(m.kernel_tag);
    out.resize(kHeader, 0);
    for (double v : m.values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    return out;
}

MatrixFile decode_matrix(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError("not a matrix file (bad magic)");
    MatrixFile m;
    std::uint32_t n = 0;
    for (int k = 0; k < 4; ++k) n |= static_cast<std::uint32_t>(bytes[4 + k]) << (8 * k);
    m.n = n;
    m.mode = bytes[8];
    m.kernel_tag = bytes[9];
    if (m.mode > MatrixFile::kModeWasserstein) throw DataError("matrix file: unknown mode tag");
    if (bytes.size() != kHeader + 8 * m.n * m.n) throw DataError("matrix file: truncated or oversized payload");
    m.values.resize(m.n * m.n);
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = std::bit_cast<double>(get_u64(bytes.data() + kHeader + 8 * i));
    return m;
}

void write_matrix_file(const std::filesystem::path& path, const MatrixFile& m) {
    auto bytes = encode_matrix(m);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("write failed: " + path.string());
}

MatrixFile read_matrix_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_matrix(bytes);
}

void save_gram(const std::filesystem::path& path, const GramMatrix& g, const std::string& manifest_hash) {
    MatrixFile m;
    m.n = g.size();
    m.mode = g.mode() == GramMode::Exact ? MatrixFile::kModeExact : MatrixFile::kModeEstimated;
    m.kernel_tag = static_cast<std::uint8_t>(g.kernel().family);
    m.values.assign(g.values().begin(), g.values().end());
    write_matrix_file(path, m);
    Json side{{"kernel", kernel_to_json(g.kernel())},
              {"mode", g.mode() == GramMode::Exact ? "exact" : "estimated"},
              {"n", g.size()},
              {"manifest_hash", manifest_hash}};
    std::ofstream f(path.string() + ".json");
    if (!f) throw DataError("cannot write sidecar for " + path.string());
    f << side.dump(2) << '\n';
}

GramMatrix load_gram(const std::filesystem::path& path) {
    MatrixFile m = read_matrix_file(path);
    if (m.mode == MatrixFile::kModeWasserstein) throw ModeError("load_gram: file holds Wasserstein distances");
    KernelSpec kernel;
    std::ifstream side(path.string() + ".json");
    if (side) {
        try {
            kernel = kernel_from_json(Json::parse(side).at("kernel"));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad Gram sidecar: ") + e.what());
        }
    } else if (m.kernel_tag <= 3) {
        kernel.family = static_cast<KernelFamily>(m.kernel_tag);
    }
    return GramMatrix(m.n, std::move(m.values), m.mode == MatrixFile::kModeExact ? GramMode::Exact : GramMode::Estimated,
                      kernel);
}

void write_matrix_csv(const std::filesystem::path& path, std::size_t n, std::span<const double> values) {
    if (values.size() != n * n) throw InputError("write_matrix_csv: expected n*n values");
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << std::setprecision(17);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < n; ++l) f << (l ? "," : "") << values[i * n + l];
        f << '\n';
    }
}

}  // namespace distkm
