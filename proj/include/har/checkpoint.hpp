#ifndef HAR_CHECKPOINT_HPP
#define HAR_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include "har/tensor.hpp"
#include "json.hpp"

namespace har {

// Parameter checkpoint: versioned magic, a JSON manifest listing every
// tensor (name, shape, byte offset into the blob), then the values as
// little-endian float64.
//
//   "HARCKPT1" | u64 manifest_size | manifest JSON | blob
//
// meta travels inside the manifest under "meta".
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const nn::Tensor*>>& tensors,
                     const nlohmann::json& meta = {});

struct Checkpoint {
  std::map<std::string, nn::Tensor> tensors;
  nlohmann::json meta;

  const nn::Tensor& require(const std::string& name) const;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace har

#endif  // HAR_CHECKPOINT_HPP
