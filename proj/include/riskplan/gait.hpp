#pragma once

// Gait schedules: which limbs hold which foothold at each critical instant.

#include <string>
#include <vector>

namespace riskplan::planner {

/// Old: on the foothold of the current round. Swing: in the air.
/// New: on the foothold of the next round.
enum class LimbPhase { Old, Swing, New };

const char* to_string(LimbPhase p);

/// Phase pattern of one round, repeated for every round.
struct GaitSchedule {
  std::string name = "custom";
  int rounds = 1;
  std::vector<std::vector<LimbPhase>> phases;  ///< [instant][limb]

  int instants_per_round() const { return static_cast<int>(phases.size()); }
  int total_instants() const { return rounds * instants_per_round(); }
  int limb_count() const { return phases.empty() ? 0 : static_cast<int>(phases.front().size()); }
  bool contact(int instant_in_round, int limb) const;
  int contacts(int instant_in_round) const;
  std::vector<int> swing_limbs(int instant_in_round) const;
  /// Contacts at each instant of a round.
  std::vector<int> contacts_per_instant() const;

  /// Throws InvalidInput unless every instant keeps at least three contacts
  /// and each limb follows Old* Swing+ New* within the round.
  void validate(int limbs) const;

  /// One limb at a time: instant 2k lifts limb k, instant 2k+1 places it and
  /// pushes the body, giving 2L instants per round.
  static GaitSchedule one_leg(int limbs, int rounds);
  /// Two alternating tripods {0, 2, 4} and {1, 3, 5}: lift A, place A,
  /// lift B, place B. Requires six limbs.
  static GaitSchedule tripod(int rounds);
};

}  // namespace riskplan::planner
