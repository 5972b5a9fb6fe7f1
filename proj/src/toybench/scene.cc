#include <algorithm>
#include <cmath>

#include "eda/error.h"
#include "eda/toybench.h"
#include "random.h"

namespace eda::toybench {

namespace {

constexpr double kSceneExtent = 10.0;
constexpr double kMinSize = 0.3;
constexpr double kMaxSize = 2.5;
constexpr double kMargin = 0.5;
constexpr int kPlacementAttempts = 10000;

double dist(const Box& a, const Box& b, bool with_z) {
  const double dx = a.center[0] - b.center[0];
  const double dy = a.center[1] - b.center[1];
  const double dz = with_z ? a.center[2] - b.center[2] : 0.0;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  double inter = 1, va = 1, vb = 1;
  for (int i = 0; i < 3; ++i) {
    const double lo = std::max(a.center[i] - a.size[i] / 2, b.center[i] - b.size[i] / 2);
    const double hi = std::min(a.center[i] + a.size[i] / 2, b.center[i] + b.size[i] / 2);
    inter *= std::max(0.0, hi - lo);
    va *= a.size[i];
    vb *= b.size[i];
  }
  return inter / (va + vb - inter);
}

bool relation_holds(const Vocab& vocab, int r, const ToyObject& a, const ToyObject& b) {
  if (r < 0 || r >= static_cast<int>(vocab.relations.size())) {
    throw InvalidInput("relation index out of range");
  }
  const std::string& name = vocab.relations[r].name;
  const Box& x = a.box;
  const Box& y = b.box;
  if (name == "next to") {
    return dist(x, y, false) < 2.0 && std::abs(x.center[2] - y.center[2]) < kMargin;
  }
  if (name == "under") return x.center[2] < y.center[2] - kMargin && dist(x, y, false) < 2.5;
  if (name == "above") return x.center[2] > y.center[2] + kMargin && dist(x, y, false) < 2.5;
  if (name == "left of") return x.center[0] < y.center[0] - kMargin && dist(x, y, true) < 4.0;
  if (name == "right of") return x.center[0] > y.center[0] + kMargin && dist(x, y, true) < 4.0;
  if (name == "near") return dist(x, y, true) < 2.5;
  throw ConfigError("no geometric predicate for relation \"" + name + "\"");
}

void SceneConfig::validate(const Vocab& vocab) const {
  if (min_objects < 1) throw ConfigError("scene.min_objects must be >= 1");
  if (max_objects < min_objects) throw ConfigError("scene.max_objects must be >= min_objects");
  if (max_objects > 64) throw ConfigError("scene.max_objects must be <= 64");
  if (!(multiple_prob >= 0 && multiple_prob <= 1)) {
    throw ConfigError("scene.multiple_prob must lie in [0, 1]");
  }
  if (max_same_category < 2) throw ConfigError("scene.max_same_category must be >= 2");
  if (!(max_pair_iou > 0 && max_pair_iou <= 1)) {
    throw ConfigError("scene.max_pair_iou must lie in (0, 1]");
  }
  if (vocab.categories.size() < 2) throw ConfigError("vocab needs at least two categories");
}

ToyScene gen_scene(std::uint64_t seed, const SceneConfig& config, const Vocab& vocab,
                   std::string scene_id) {
  config.validate(vocab);
  Rng rng(seed);
  const int ncat = static_cast<int>(vocab.categories.size());
  const int n = rnd::uniform_int(rng, config.min_objects, config.max_objects);
  const bool multiple = n >= 2 && rnd::uniform(rng) < config.multiple_prob;
  const int focus_cat = rnd::uniform_int(rng, 0, ncat - 1);
  const int same = multiple ? rnd::uniform_int(rng, 2, std::min(config.max_same_category, n)) : 1;

  ToyScene scene;
  scene.scene_id = std::move(scene_id);
  scene.multiple = multiple;
  for (int i = 0; i < n; ++i) {
    ToyObject o;
    if (i < same) {
      o.category = focus_cat;
    } else {
      o.category = rnd::uniform_int(rng, 0, ncat - 2);
      if (o.category >= focus_cat) ++o.category;
    }
    o.color = rnd::uniform_int(rng, 0, static_cast<int>(vocab.colors.size()) - 1);
    o.material = rnd::uniform_int(rng, 0, static_cast<int>(vocab.materials.size()) - 1);
    o.size_tag = rnd::uniform_int(rng, 0, static_cast<int>(vocab.sizes.size()) - 1);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      for (int d = 0; d < 3; ++d) {
        o.box.center[d] = rnd::uniform(rng, 0, kSceneExtent);
        o.box.size[d] = rnd::uniform(rng, kMinSize, kMaxSize);
      }
      placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const ToyObject& p) {
        return box_iou(o.box, p.box) < config.max_pair_iou;
      });
    }
    if (!placed) throw ConfigError("cannot place " + std::to_string(n) + " boxes without overlap");
    scene.objects.push_back(o);
  }
  rnd::shuffle(scene.objects, rng);
  for (int i = 0; i < n; ++i) {
    if (scene.objects[i].category == focus_cat) {
      scene.focus = i;
      break;
    }
  }
  return scene;
}

}  // namespace eda::toybench
