#pragma once

#include <string>
#include <vector>

#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"

namespace xlingua {

struct InterleavedCorpus {
  std::vector<DialoguePair> pairs;
  std::size_t block_size = 0;  // auxiliary examples emitted before each target example
  std::string aux_language;
  std::string tgt_language;
};

/// Even interleaving: block_size = floor(N_aux / N_tgt) auxiliary examples,
/// then one target example, repeated N_tgt times; the N_aux mod N_tgt leftover
/// auxiliary examples go at the tail. Both streams keep their order.
inline InterleavedCorpus interleave_even(const Corpus& aux, const Corpus& tgt) {
  const std::size_t n_aux = aux.size(), n_tgt = tgt.size();
  if (n_tgt == 0) {
    fail(ErrorCategory::precondition, "N_tgt = 0: nothing to interleave, train on the auxiliary data alone");
  }
  if (n_tgt > n_aux) {
    fail(ErrorCategory::precondition, "N_tgt > N_aux (" + std::to_string(n_tgt) + " > " +
                                          std::to_string(n_aux) + "): block size would be 0");
  }
  if (aux.language() == tgt.language()) {
    fail(ErrorCategory::precondition, "auxiliary and target corpora share language '" + aux.language() + "'");
  }
  InterleavedCorpus out;
  out.block_size = n_aux / n_tgt;
  out.aux_language = aux.language();
  out.tgt_language = tgt.language();
  out.pairs.reserve(n_aux + n_tgt);
  std::size_t a = 0;
  for (std::size_t t = 0; t < n_tgt; ++t) {
    for (std::size_t i = 0; i < out.block_size; ++i) out.pairs.push_back(aux[a++]);
    out.pairs.push_back(tgt[t]);
  }
  while (a < n_aux) out.pairs.push_back(aux[a++]);
  return out;
}

}  // namespace xlingua
