#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pemr/gridworld.hpp"

namespace pemr {

enum class QType { RoomOf = 0, ColorOf = 1 };

std::string to_string(QType q);
QType qtype_from_string(const std::string& s);

struct QuestionSpec {
  QType qtype = QType::RoomOf;
  int target_object_id = 0;
  std::string text;
  bool operator==(const QuestionSpec&) const = default;
};

// One navigation episode: a start pose, a question about a target object and
// the expert action sequence (Stop-terminated) that reaches a pose from which
// the question is answerable.
struct Sample {
  int map_ref = 0;  // id of the house the episode lives in
  QuestionSpec question;
  int answer = 0;  // room type for RoomOf, color for ColorOf
  AgentPose start;
  std::vector<Action> expert;
  AgentPose terminal_pose;
  bool operator==(const Sample&) const = default;
};

struct House {
  int id = 0;
  GridMap map;
  bool operator==(const House&) const = default;
};

enum class Variant { Raw, Rectified, Reversed, Extended };
enum class Split { Train, Test };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  Variant variant = Variant::Raw;
  Split split = Split::Train;
  SemanticVocab vocab;
  FovParams fov;
  double terminal_dist = 3.0;
  std::vector<House> houses;
  std::vector<Sample> samples;

  const GridMap& map_of(const Sample& s) const;
  bool operator==(const Dataset&) const = default;
};

struct GenParams {
  int width = 21;
  int height = 21;
  int min_rooms = 4;
  int max_rooms = 6;
  int room_types = 6;
  int object_classes = 6;
  int object_colors = 6;
  int max_objects_per_room = 2;
  int samples_per_house = 10;
  int fov_depth = 5;
  double terminal_dist = 3.0;
  uint64_t seed = 0;

  SemanticVocab vocab() const { return {room_types, object_classes, object_colors}; }
};

// Binary-split floor plan: rooms separated by one-cell walls, one door per
// shared wall segment, objects scattered with room-consistent classes.
// Deterministic in (params, seed). Throws when the parameters cannot fit.
GridMap generate_house(const GenParams& params, uint64_t seed);

struct SampleGenResult {
  std::vector<Sample> samples;
  int dropped = 0;  // starts whose target proved unreachable
};

SampleGenResult generate_samples(const GridMap& map, int house_id, int n, uint64_t seed,
                                 const GenParams& params);

// Whether the sample's target object is ahead of `pose` within 3 cells
// forward, 1 lateral, unoccluded, and inside the terminal radius.
bool endpoint_visible(const GridMap& map, const AgentPose& pose, int tx, int ty,
                      const FovParams& fov, double terminal_dist);

// Returns the sample unchanged when its terminal already qualifies under
// endpoint_visible. Otherwise tries the last five trajectory poses, each
// under all four headings, truncating the expert there and appending the
// turns plus Stop; nullopt when no candidate qualifies.
std::optional<Sample> rectify_sample(const GridMap& map, const Sample& s, const FovParams& fov,
                                     double terminal_dist);

struct RectifyStats {
  int kept = 0;
  int reset = 0;
  int dropped = 0;
};

Dataset rectify_dataset(const Dataset& d, RectifyStats* stats = nullptr);

// Start moved k steps back along the expert trajectory from its end (clamped
// to the original start); the expert shrinks to the matching suffix.
Sample backtrack_start(const GridMap& map, const Sample& s, int k);

// Same episodes with the start heading flipped 180 degrees and the expert
// re-solved from there. Unreachable results are dropped and counted.
Dataset reverse_variant(const Dataset& d, int* dropped = nullptr);

// Rectified dataset plus freshly generated (and rectified) samples on the
// same houses, drawn with a seed derived from `seed`.
Dataset extend_variant(const Dataset& d, const GenParams& params, uint64_t seed);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Checks expert replay consistency and answer agreement with the map.
void validate_sample(const GridMap& map, const Sample& s);

}  // namespace pemr
