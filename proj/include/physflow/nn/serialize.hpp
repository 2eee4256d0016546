#ifndef PHYSFLOW_NN_SERIALIZE_HPP
#define PHYSFLOW_NN_SERIALIZE_HPP

#include "physflow/nn/train.hpp"

#include <filesystem>
#include <iosfwd>

namespace physflow::nn {

/// Current on-disk format version written by save_model.
inline constexpr std::uint32_t kModelFormatVersion = 1;

/**
 * Binary layout (all integers little-endian):
 *   4 bytes   magic "PFNN"
 *   uint32    format version
 *   uint64    header length L
 *   L bytes   UTF-8 JSON header: {"spec", "scaler", "metadata", "param_count"}
 *   uint64    parameter count P
 *   P x 8     parameters as IEEE-754 binary64, little-endian
 */
void save_model(const TrainedModel& model, std::ostream& out);
TrainedModel load_model(std::istream& in);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace physflow::nn

#endif
