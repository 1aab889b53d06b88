#include "loopcycle/rng.hpp"

namespace loopcycle {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd1342543de82ef95ULL));
  return splitmix64(h ^ (index * 0xa0761d6478bd642fULL + 0x2545f4914f6cdd1dULL));
}

Rng make_rng(std::uint64_t seed, Stream s, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(seed, s, index)),
                    static_cast<std::uint32_t>(derive_seed(seed, s, index) >> 32),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(s)),
                    static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

}  // namespace loopcycle
