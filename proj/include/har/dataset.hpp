#ifndef HAR_DATASET_HPP
#define HAR_DATASET_HPP

#include <string>
#include <vector>

#include "har/event_log.hpp"
#include "har/tokenizer.hpp"

namespace har {

// A fully pre-processed dataset: relabeled, tokenized, indexed, encoded.
struct LabeledDataset {
  std::vector<EncodedSequence> sequences;
  std::vector<std::vector<int>> index_corpus;  // unpadded indexes, aligned
  Vocabulary vocab;
  std::vector<std::string> class_names;  // label_id order, sorted

  int label_id_of(const std::string& name) const;
};

// Relabels segmented sequences, builds the frequency vocabulary over the
// whole corpus and encodes every sequence to max_len.
LabeledDataset build_dataset(const std::vector<ActivitySequence>& segments,
                             const RelabelMap& relabel, std::size_t max_len);

// Full ingestion: parse, clean, annotate, segment, then build_dataset.
LabeledDataset load_dataset_file(const std::string& path,
                                 const RelabelMap& relabel,
                                 std::size_t max_len,
                                 std::vector<std::string>* warnings = nullptr);

// Re-encodes sequences into another vocabulary's index space. Ranks are
// aligned (index i means the i-th most frequent token in either home);
// indexes past the source's real tokens collapse to the source UNK.
std::vector<EncodedSequence> remap_to_vocabulary(
    const std::vector<EncodedSequence>& sequences, const Vocabulary& source);

}  // namespace har

#endif  // HAR_DATASET_HPP
