#pragma once

#include <memory>

#include "ctrail/domain.hpp"

namespace ctrail {

struct StepOutcome {
    double reward = 0.0;
    bool terminal = false;
    bool collision = false;
    bool rejected_turn = false;
    bool lane_changed = false;
};

// Minimal simulation handle for tree search: cloneable, steppable, with a terminal flag.
class WorldModel {
  public:
    virtual ~WorldModel() = default;
    virtual std::unique_ptr<WorldModel> clone() const = 0;
    virtual StepOutcome step(MetaAction action) = 0;
    virtual bool terminal() const = 0;
};

// World that also exposes a full scene (traffic simulator, dataset replay).
class SceneWorld : public WorldModel {
  public:
    virtual const SceneState& scene() const = 0;
    // Id of the vehicle involved in the last collision, -1 if none.
    virtual std::int64_t collision_partner() const { return -1; }
};

}  // namespace ctrail
