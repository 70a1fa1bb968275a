#include "har/dataset.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace har {

int LabeledDataset::label_id_of(const std::string& name) const {
  const auto it =
      std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end())
    throw std::invalid_argument("unknown class: " + name);
  return static_cast<int>(it - class_names.begin());
}

LabeledDataset build_dataset(const std::vector<ActivitySequence>& segments,
                             const RelabelMap& relabel, std::size_t max_len) {
  LabeledDataset ds;

  std::vector<std::vector<std::string>> token_corpus;
  std::vector<std::string> labels;
  token_corpus.reserve(segments.size());
  labels.reserve(segments.size());
  std::set<std::string> class_set;
  for (const ActivitySequence& seq : segments) {
    token_corpus.push_back(tokens_of_sequence(seq));
    labels.push_back(relabel.relabel(seq.label));
    class_set.insert(labels.back());
  }
  ds.class_names.assign(class_set.begin(), class_set.end());

  ds.vocab = Vocabulary::build(token_corpus);
  ds.sequences.reserve(segments.size());
  ds.index_corpus.reserve(segments.size());
  for (std::size_t i = 0; i < token_corpus.size(); ++i) {
    EncodedSequence enc = encode(token_corpus[i], ds.vocab, max_len);
    enc.label_id = ds.label_id_of(labels[i]);
    ds.sequences.push_back(std::move(enc));

    std::vector<int> indexes;
    indexes.reserve(token_corpus[i].size());
    for (const std::string& tok : token_corpus[i])
      indexes.push_back(ds.vocab.index_of(tok));
    ds.index_corpus.push_back(std::move(indexes));
  }
  return ds;
}

LabeledDataset load_dataset_file(const std::string& path,
                                 const RelabelMap& relabel,
                                 std::size_t max_len,
                                 std::vector<std::string>* warnings) {
  const std::vector<SensorEvent> raw = parse_file(path, warnings);
  CleaningReport report;
  const std::vector<SensorEvent> cleaned = clean(raw, &report);
  const std::vector<LabeledEvent> labeled = annotate(cleaned, warnings);
  return build_dataset(segment(labeled), relabel, max_len);
}

std::vector<EncodedSequence> remap_to_vocabulary(
    const std::vector<EncodedSequence>& sequences, const Vocabulary& source) {
  const int max_real = static_cast<int>(source.real_token_count());
  std::vector<EncodedSequence> out = sequences;
  for (EncodedSequence& seq : out)
    for (std::size_t i = 0; i < seq.indexes.size(); ++i)
      if (seq.mask[i] && seq.indexes[i] > max_real)
        seq.indexes[i] = source.unk_index();
  return out;
}

}  // namespace har
