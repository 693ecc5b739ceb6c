// Shared builders for the unit tests.
#pragma once

#include "pushsim/crypto.hpp"
#include "pushsim/tpm.hpp"

namespace pushsim::testing {

inline crypto::Seed seed_of(std::uint64_t n) { return crypto::Rng(n).seed32(); }

inline const crypto::KeyPair& manufacturer() {
  static const auto kp = crypto::keygen(seed_of(1000), crypto::KeyRole::Authority);
  return kp;
}

inline const Bytes& owner_auth() {
  static const Bytes auth = to_bytes("owner secret");
  return auth;
}

inline tpm::Tpm owned_tpm(std::uint64_t n = 1) {
  auto t = tpm::Tpm::manufacture(seed_of(n), manufacturer().private_key);
  t.take_ownership(owner_auth());
  return t;
}

template <typename F>
tpm::TpmErrc tpm_error_of(F&& f) {
  try {
    f();
  } catch (const tpm::TpmError& e) {
    return e.code();
  }
  throw std::logic_error("expected a TpmError");
}

}  // namespace pushsim::testing
