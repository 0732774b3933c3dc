#ifndef WRIB_PROTOCOL_HPP
#define WRIB_PROTOCOL_HPP

#include <cstdint>

namespace wrib {

// Fixed constants of the published evaluation protocol on the scenery
// dataset. Kept in one place so the tools and tests agree.
namespace protocol {

inline constexpr int64_t kTrainImages = 5040;
inline constexpr int64_t kTestImages = 1000;

inline constexpr int64_t kEvalCropWidth = 512;
inline constexpr int64_t kEvalCropLeft = 128;

inline constexpr int64_t kKidSubsets = 100;
inline constexpr int64_t kKidSubsetSize = 100;

// Reference scores of the original full-scale model under this protocol.
inline constexpr double kReferenceFid = 36.13;
inline constexpr double kReferenceKidMean = 0.0116;
inline constexpr double kReferenceKidStd = 0.0005;

inline constexpr char kProtocolTag[] = "scenery-center512-v1";
inline constexpr char kCheckpointTag[] = "wrib-v1";

inline constexpr int64_t kMiningTopK = 3;

} // namespace protocol

} // namespace wrib

#endif // WRIB_PROTOCOL_HPP
