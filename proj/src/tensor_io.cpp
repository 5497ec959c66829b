#include "tdn/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tdn {

namespace {

void put_u32_le(std::string& out, uint32_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
    out.push_back(static_cast<char>((x >> 16) & 0xff));
    out.push_back(static_cast<char>((x >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

std::string encode_tdn1(const std::vector<int>& dims, const std::vector<double>& data) {
    size_t count = 1;
    for (int d : dims) {
        check(d > 0, "tdn1: dims must be positive");
        count *= static_cast<size_t>(d);
    }
    check(count == data.size(), "tdn1: dims do not match element count");
    std::string out;
    out.reserve(8 + 4 * dims.size() + 4 * data.size());
    out += "TDN1";
    put_u32_le(out, static_cast<uint32_t>(dims.size()));
    for (int d : dims) put_u32_le(out, static_cast<uint32_t>(d));
    for (double x : data) {
        float f = static_cast<float>(x);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32_le(out, bits);
    }
    return out;
}

Tdn1 decode_tdn1(const unsigned char* p, size_t avail, const std::string& ctx) {
    auto bad = [&](const std::string& m) -> Tdn1 {
        throw std::runtime_error(ctx + ": " + m);
    };
    if (avail < 8 || std::memcmp(p, "TDN1", 4) != 0) return bad("not a TDN1 container");
    uint32_t rank = get_u32_le(p + 4);
    if (rank > 8) return bad("implausible rank");
    if (avail < 8 + 4 * static_cast<size_t>(rank)) return bad("truncated dims");
    Tdn1 t;
    size_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        uint32_t d = get_u32_le(p + 8 + 4 * i);
        t.dims.push_back(static_cast<int>(d));
        count *= d;
    }
    size_t off = 8 + 4 * static_cast<size_t>(rank);
    if (avail < off + 4 * count) return bad("truncated payload");
    t.data.resize(count);
    for (size_t i = 0; i < count; ++i) {
        uint32_t bits = get_u32_le(p + off + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        t.data[i] = static_cast<double>(f);
    }
    return t;
}

size_t tdn1_byte_size(uint32_t rank, size_t count) { return 8 + 4 * rank + 4 * count; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void write_tdn1(const std::string& path, const std::vector<int>& dims,
                const std::vector<double>& data) {
    spit(path, encode_tdn1(dims, data));
}

Tdn1 read_tdn1(const std::string& path) {
    std::string bytes = slurp(path);
    return decode_tdn1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), path);
}

void write_mat(const std::string& path, const Mat& m) {
    write_tdn1(path, {m.rows, m.cols}, m.v);
}

Mat read_mat(const std::string& path) {
    Tdn1 t = read_tdn1(path);
    if (t.dims.size() != 2) throw std::runtime_error(path + ": expected rank-2 container");
    Mat m(t.dims[0], t.dims[1]);
    m.v = std::move(t.data);
    return m;
}

void write_archive(const std::string& path, const std::vector<ArchiveEntry>& entries) {
    std::string manifest = "TDNA1\n";
    manifest += "n " + std::to_string(entries.size()) + "\n";
    std::string blob;
    for (const auto& e : entries) {
        check(e.name.find('\t') == std::string::npos && e.name.find('\n') == std::string::npos,
              "archive: entry name contains tab/newline");
        manifest += e.name + "\t";
        for (size_t i = 0; i < e.dims.size(); ++i) {
            if (i) manifest += " ";
            manifest += std::to_string(e.dims[i]);
        }
        manifest += "\t" + std::to_string(blob.size()) + "\n";
        blob += encode_tdn1(e.dims, e.data);
    }
    manifest += "DATA\n";
    spit(path, manifest + blob);
}

std::vector<ArchiveEntry> read_archive(const std::string& path) {
    std::string bytes = slurp(path);
    auto bad = [&](const std::string& m) -> std::vector<ArchiveEntry> {
        throw std::runtime_error(path + ": " + m);
    };
    size_t pos = 0;
    auto next_line = [&]() -> std::string {
        size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos) throw std::runtime_error(path + ": truncated manifest");
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    if (next_line() != "TDNA1") return bad("bad magic");
    std::string nline = next_line();
    if (nline.rfind("n ", 0) != 0) return bad("bad count line");
    size_t n = std::stoul(nline.substr(2));
    struct Row {
        std::string name;
        size_t offset;
    };
    std::vector<Row> rows;
    for (size_t i = 0; i < n; ++i) {
        std::string line = next_line();
        size_t t1 = line.find('\t');
        size_t t2 = line.rfind('\t');
        if (t1 == std::string::npos || t2 == t1) return bad("bad manifest row");
        rows.push_back({line.substr(0, t1), std::stoul(line.substr(t2 + 1))});
    }
    if (next_line() != "DATA") return bad("missing DATA marker");
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
    size_t avail = bytes.size() - pos;
    std::vector<ArchiveEntry> out;
    for (const auto& r : rows) {
        if (r.offset > avail) return bad("offset out of range for " + r.name);
        Tdn1 t = decode_tdn1(base + r.offset, avail - r.offset, path + ":" + r.name);
        out.push_back({r.name, std::move(t.dims), std::move(t.data)});
    }
    return out;
}

}  // namespace tdn
