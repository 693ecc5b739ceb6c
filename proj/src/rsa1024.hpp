// 1024-bit RSA preset. Internal to crypto.cpp.
#pragma once

#include "pushsim/crypto.hpp"

namespace pushsim::crypto::rsa {

inline constexpr std::size_t kModulusBytes = 128;

struct KeyMaterial {
  Bytes public_material;
  Bytes private_material;
};

KeyMaterial generate(const Seed& seed);

Bytes sign(ByteView private_material, ByteView msg);
bool verify(ByteView public_material, ByteView msg, ByteView signature);

struct Encapsulation {
  Bytes encapsulated;  // kModulusBytes
  Bytes secret;        // 32 bytes
};

Encapsulation encapsulate(ByteView public_material, Rng& rng);
Bytes decapsulate(ByteView private_material, ByteView encapsulated);

}  // namespace pushsim::crypto::rsa
