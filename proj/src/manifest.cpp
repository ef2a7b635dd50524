#include "distkm/manifest.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "distkm/error.hpp"

namespace distkm {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

class Fnv {
public:
    void bytes(const void* p, std::size_t n) {
        auto c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= c[i];
            h_ *= 0x100000001B3ULL;
        }
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
        bytes(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::string hex() const {
        std::ostringstream o;
        o << std::hex << std::setw(16) << std::setfill('0') << h_;
        return o.str();
    }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace

EmpiricalDistribution read_empirical_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    std::string line;
    std::vector<double> rows, counts;
    std::size_t dim = 0, line_no = 0;
    std::optional<std::size_t> count_col;
    bool first = true;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_csv(line);
        std::vector<double> vals(cells.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_double(cells[c], vals[c]);
        if (first) {
            first = false;
            if (!numeric) {  // header
                for (std::size_t c = 0; c < cells.size(); ++c)
                    if (cells[c] == "count") count_col = c;
                dim = cells.size() - (count_col ? 1 : 0);
                continue;
            }
            dim = cells.size();
        }
        if (!numeric) throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value");
        if (cells.size() != dim + (count_col ? 1 : 0))
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": wrong number of columns");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!std::isfinite(vals[c])) throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
            if (count_col && c == *count_col)
                counts.push_back(vals[c]);
            else
                rows.push_back(vals[c]);
        }
    }
    if (dim == 0 || rows.empty()) throw DataError(path.string() + ": no observations");
    try {
        return count_col ? EmpiricalDistribution::with_counts(dim, rows, counts) : EmpiricalDistribution(dim, rows);
    } catch (const InputError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_empirical_csv(const fs::path& path, const EmpiricalDistribution& e) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    for (std::size_t d = 0; d < e.dim(); ++d) f << (d ? "," : "") << "x" << d + 1;
    if (e.weighted()) f << ",count";
    f << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < e.atom_count(); ++i) {
        for (std::size_t d = 0; d < e.dim(); ++d) f << (d ? "," : "") << e.value(i, d);
        if (e.weighted()) f << ',' << e.count(i);
        f << '\n';
    }
    if (!f) throw DataError("write failed: " + path.string());
}

DistributionRecord read_record(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return {read_empirical_csv(path), std::nullopt};
    if (ext == ".json") {
        std::ifstream f(path);
        if (!f) throw DataError("cannot read " + path.string());
        Json j = Json::parse(f, nullptr, false);
        if (j.is_discarded()) throw DataError(path.string() + ": invalid JSON");
        DistributionRecord r;
        try {
            r.payload = mixture_from_json(j);
        } catch (const InputError& e) {
            throw DataError(path.string() + ": " + e.what());
        }
        if (j.contains("label") && j["label"].is_string()) r.label = j["label"].get<std::string>();
        return r;
    }
    throw DataError(path.string() + ": unsupported record format (expected .csv or .json)");
}

void write_record(const fs::path& path, const DistributionRecord& r) {
    if (r.is_empirical()) {
        write_empirical_csv(path, r.empirical());
        return;
    }
    Json j = mixture_to_json(r.mixture());
    if (r.label) j["label"] = *r.label;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << std::setprecision(17) << j.dump() << '\n';
}

std::vector<ManifestEntry> read_manifest_entries(const fs::path& manifest) {
    std::ifstream f(manifest);
    if (!f) throw DataError("cannot read manifest " + manifest.string());
    Json j = Json::parse(f, nullptr, false);
    if (j.is_discarded()) throw DataError(manifest.string() + ": invalid JSON");
    const Json& list = j.is_array() ? j : (j.contains("records") ? j["records"] : Json());
    if (!list.is_array()) throw DataError(manifest.string() + ": expected a list of {path, label}");
    std::vector<ManifestEntry> out;
    for (const auto& e : list) {
        if (!e.is_object() || !e.contains("path") || !e["path"].is_string())
            throw DataError(manifest.string() + ": every entry needs a string \"path\"");
        ManifestEntry m{e["path"].get<std::string>(), std::nullopt};
        if (e.contains("label") && !e["label"].is_null()) {
            m.label = e["label"].is_string() ? e["label"].get<std::string>() : e["label"].dump();
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<DistributionRecord> read_manifest(const fs::path& manifest) {
    const fs::path base = manifest.parent_path();
    std::vector<DistributionRecord> out;
    for (const auto& e : read_manifest_entries(manifest)) {
        fs::path p = e.path;
        if (p.is_relative()) p = base / p;
        DistributionRecord r = read_record(p);
        if (e.label) r.label = e.label;
        out.push_back(std::move(r));
    }
    return out;
}

std::filesystem::path write_manifest(const fs::path& dir, std::span<const DistributionRecord> records,
                                     const Json& meta) {
    fs::create_directories(dir / "records");
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < records.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu%s", i, records[i].is_empirical() ? ".csv" : ".json");
        const std::string rel = std::string("records/") + name;
        write_record(dir / rel, records[i]);
        entries.push_back({rel, records[i].label});
    }
    const fs::path manifest = dir / "manifest.json";
    Json m = meta;
    m["content_hash"] = content_hash(records);
    write_manifest_entries(manifest, entries, m);
    return manifest;
}

void write_manifest_entries(const fs::path& manifest, std::span<const ManifestEntry> entries, const Json& meta) {
    Json list = Json::array();
    for (const auto& e : entries) {
        Json item{{"path", e.path}};
        item["label"] = e.label ? Json(*e.label) : Json(nullptr);
        list.push_back(item);
    }
    Json j = meta.is_object() ? meta : Json::object();
    j["records"] = list;
    std::ofstream f(manifest);
    if (!f) throw DataError("cannot write " + manifest.string());
    f << j.dump(2) << '\n';
}

std::string content_hash(std::span<const DistributionRecord> records) {
    Fnv h;
    h.u64(records.size());
    for (const auto& r : records) {
        h.str(r.label.value_or(""));
        if (r.is_mixture()) {
            h.u64(1);
            for (const auto& c : r.mixture().components()) {
                h.f64(c.weight);
                h.f64(c.a);
                h.f64(c.b);
            }
        } else {
            const auto& e = r.empirical();
            h.u64(2);
            h.u64(e.dim());
            h.u64(e.atom_count());
            for (double v : e.column_data()) h.f64(v);
            for (double c : e.counts()) h.f64(c);
        }
    }
    return h.hex();
}

std::string fnv1a_hex(std::string_view bytes) {
    Fnv h;
    h.bytes(bytes.data(), bytes.size());
    return h.hex();
}

std::string file_hash(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    Fnv h;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        h.bytes(buf, static_cast<std::size_t>(f.gcount()));
    }
    return h.hex();
}

std::vector<std::string> record_labels(std::span<const DistributionRecord> records) {
    std::vector<std::string> out;
    for (const auto& r : records) out.push_back(r.label.value_or(""));
    return out;
}

}  // namespace distkm
