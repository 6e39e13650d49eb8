#include "snnlab/fsio.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "snnlab/error.hpp"

namespace snnlab::fsio {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_bytes(std::string& out, const std::string& v) {
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    out.append(v);
}

std::uint8_t Reader::u8() {
    if (pos + 1 > buf.size()) throw IoError("unexpected end of file");
    return static_cast<std::uint8_t>(buf[pos++]);
}

std::uint32_t Reader::u32() {
    if (pos + 4 > buf.size()) throw IoError("unexpected end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
}

std::uint64_t Reader::u64() {
    if (pos + 8 > buf.size()) throw IoError("unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
}

double Reader::f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string Reader::bytes() {
    const std::uint32_t n = u32();
    if (pos + n > buf.size()) throw IoError("unexpected end of file");
    std::string v = buf.substr(pos, n);
    pos += n;
    return v;
}

void Reader::expect_magic(const std::string& magic, const std::string& what) {
    if (buf.size() < pos + magic.size() || buf.compare(pos, magic.size(), magic) != 0)
        throw IoError(what + ": bad magic, not a recognized file");
    pos += magic.size();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoError("read failure on '" + path + "'");
    return bytes;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out.good()) throw IoError("write failure on '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

DirLock::DirLock(const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    path_ = (std::filesystem::path(directory) / ".snnlab.lock").string();
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
        throw IoError("output directory '" + directory +
                      "' is locked by another run (remove " + path_ + " if stale)");
    }
    std::fclose(f);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

}  // namespace snnlab::fsio
