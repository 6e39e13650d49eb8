#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace snnlab::fsio {

// Little-endian primitive encoding into a byte buffer.
void put_u8(std::string& out, std::uint8_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
void put_bytes(std::string& out, const std::string& v);  // u32 length prefix

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string bytes();  // u32 length prefix
    void expect_magic(const std::string& magic, const std::string& what);
    bool done() const { return pos == buf.size(); }
};

std::string read_file(const std::string& path);

// Writes to <path>.tmp then renames, so a crash never leaves a readable
// truncated file at the final path.
void write_file_atomic(const std::string& path, const std::string& bytes);

// Exclusive-creation lock file guarding an output directory; removed on
// destruction. Throws IoError if the lock is already held.
class DirLock {
public:
    explicit DirLock(const std::string& directory);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

}  // namespace snnlab::fsio
