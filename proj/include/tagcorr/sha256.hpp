#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace tagcorr {

// Incremental SHA-256 (FIPS 180-4) used for the manifest digests.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, std::size_t len);
    std::array<std::uint8_t, 32> finish();

private:
    void process_block(const std::uint8_t* p);

    std::uint32_t state_[8];
    std::uint64_t total_ = 0;
    std::uint8_t buf_[64];
    std::size_t buf_len_ = 0;
};

std::string to_hex(const std::array<std::uint8_t, 32>& digest);
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& text);

}  // namespace tagcorr
