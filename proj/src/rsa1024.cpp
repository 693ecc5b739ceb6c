#include "rsa1024.hpp"

#include <gmpxx.h>

namespace pushsim::crypto::rsa {

namespace {

const mpz_class kPublicExponent = 65537;

mpz_class to_mpz(ByteView be) {
  mpz_class out;
  if (!be.empty()) mpz_import(out.get_mpz_t(), be.size(), 1, 1, 1, 0, be.data());
  return out;
}

// Fixed-width big-endian; value must fit.
Bytes to_bytes_be(const mpz_class& v, std::size_t width) {
  std::size_t count = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (v == 0) count = 0;
  if (count > width) throw CryptoError(CryptoErrc::MalformedKey, "rsa: value too wide");
  Bytes out(width, 0);
  if (count > 0) {
    std::size_t written = 0;
    mpz_export(out.data() + (width - count), &written, 1, 1, 1, 0, v.get_mpz_t());
  }
  return out;
}

Bytes mgf1(ByteView seed, std::size_t length) {
  Bytes out;
  for (std::uint32_t counter = 0; out.size() < length; ++counter) {
    Writer w;
    w.raw(seed);
    for (int i = 3; i >= 0; --i) w.u8(static_cast<std::uint8_t>(counter >> (8 * i)));
    auto block = hash(w.data());
    out.insert(out.end(), block.bytes().begin(), block.bytes().end());
  }
  out.resize(length);
  return out;
}

mpz_class random_prime(Rng& stream) {
  auto raw = stream.bytes(kModulusBytes / 2);
  mpz_class candidate = to_mpz(raw);
  mpz_setbit(candidate.get_mpz_t(), 511);
  mpz_setbit(candidate.get_mpz_t(), 510);
  mpz_setbit(candidate.get_mpz_t(), 0);
  mpz_class prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

struct PublicParts {
  mpz_class n;
  mpz_class e;
};

struct PrivateParts {
  mpz_class n;
  mpz_class d;
};

PublicParts parse_public(ByteView material) {
  try {
    Reader r(material);
    PublicParts out{to_mpz(r.bytes()), to_mpz(r.bytes())};
    r.expect_end();
    if (mpz_sizeinbase(out.n.get_mpz_t(), 2) != 1024 || out.e < 3) {
      throw CryptoError(CryptoErrc::MalformedKey, "rsa: bad public key");
    }
    return out;
  } catch (const CodecError&) {
    throw CryptoError(CryptoErrc::MalformedKey, "rsa: unparsable public key");
  }
}

PrivateParts parse_private(ByteView material) {
  try {
    Reader r(material);
    PrivateParts out{to_mpz(r.bytes()), to_mpz(r.bytes())};
    r.bytes();  // p
    r.bytes();  // q
    r.expect_end();
    if (mpz_sizeinbase(out.n.get_mpz_t(), 2) != 1024 || out.d <= 0) {
      throw CryptoError(CryptoErrc::MalformedKey, "rsa: bad private key");
    }
    return out;
  } catch (const CodecError&) {
    throw CryptoError(CryptoErrc::MalformedKey, "rsa: unparsable private key");
  }
}

mpz_class full_domain_hash(ByteView msg) {
  Writer w;
  w.str("pushsim.rsa.fdh").bytes(msg);
  return to_mpz(mgf1(w.data(), kModulusBytes - 1));
}

mpz_class powm(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

Bytes kem_secret(const Bytes& r, const Bytes& encapsulated) {
  Writer w;
  w.str("pushsim.rsa.kem").bytes(r).bytes(encapsulated);
  auto d = hash(w.data());
  return Bytes(d.bytes().begin(), d.bytes().end());
}

}  // namespace

KeyMaterial generate(const Seed& seed) {
  Rng stream(seed);
  for (;;) {
    mpz_class p = random_prime(stream);
    mpz_class q = random_prime(stream);
    if (p == q) continue;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), kPublicExponent.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    mpz_class d;
    mpz_invert(d.get_mpz_t(), kPublicExponent.get_mpz_t(), phi.get_mpz_t());
    mpz_class n = p * q;

    KeyMaterial out;
    out.public_material = Writer()
                              .bytes(to_bytes_be(n, kModulusBytes))
                              .bytes(to_bytes_be(kPublicExponent, 3))
                              .take();
    out.private_material = Writer()
                               .bytes(to_bytes_be(n, kModulusBytes))
                               .bytes(to_bytes_be(d, kModulusBytes))
                               .bytes(to_bytes_be(p, kModulusBytes / 2))
                               .bytes(to_bytes_be(q, kModulusBytes / 2))
                               .take();
    return out;
  }
}

Bytes sign(ByteView private_material, ByteView msg) {
  auto key = parse_private(private_material);
  return to_bytes_be(powm(full_domain_hash(msg), key.d, key.n), kModulusBytes);
}

bool verify(ByteView public_material, ByteView msg, ByteView signature) {
  auto key = parse_public(public_material);
  if (signature.size() != kModulusBytes) return false;
  mpz_class s = to_mpz(signature);
  if (s >= key.n) return false;
  return powm(s, key.e, key.n) == full_domain_hash(msg);
}

Encapsulation encapsulate(ByteView public_material, Rng& rng) {
  auto key = parse_public(public_material);
  mpz_class r = to_mpz(rng.bytes(kModulusBytes - 1));
  Encapsulation out;
  out.encapsulated = to_bytes_be(powm(r, key.e, key.n), kModulusBytes);
  out.secret = kem_secret(to_bytes_be(r, kModulusBytes), out.encapsulated);
  return out;
}

Bytes decapsulate(ByteView private_material, ByteView encapsulated) {
  auto key = parse_private(private_material);
  if (encapsulated.size() != kModulusBytes) {
    throw CryptoError(CryptoErrc::Parse, "rsa: bad encapsulation length");
  }
  mpz_class c = to_mpz(encapsulated);
  if (c >= key.n) throw CryptoError(CryptoErrc::AuthFailure, "rsa: encapsulation out of range");
  Bytes enc(encapsulated.begin(), encapsulated.end());
  return kem_secret(to_bytes_be(powm(c, key.d, key.n), kModulusBytes), enc);
}

}  // namespace pushsim::crypto::rsa
