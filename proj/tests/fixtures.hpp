#pragma once

// Shared test fixtures.
//
// F1 is the 6-node scholarly micro-graph used across the suites:
//   I1  Institution     "Point Park University"
//   A1  Author          "Alice Carter"
//   A2  Author          "Bob Delgado"
//   P1  Paper           "stellar populations in tidal tails"
//   P2  Paper           "graph neural networks"
//   F1c Field-of-Study  "Stellar Populations"
// edges: I1-A1, I1-A2, A1-P1, A2-P2, F1c-P1

#include <sstream>
#include <string>

#include "tgr/kb.hpp"

namespace fixtures {

inline const char* kF1Nodes =
    R"({"id":"I1","category":"Institution","text":"Point Park University"}
{"id":"A1","category":"Author","text":"Alice Carter"}
{"id":"A2","category":"Author","text":"Bob Delgado"}
{"id":"P1","category":"Paper","text":"stellar populations in tidal tails"}
{"id":"P2","category":"Paper","text":"graph neural networks"}
{"id":"F1c","category":"Field-of-Study","text":"Stellar Populations"}
)";

inline const char* kF1Edges =
    R"({"src":"I1","dst":"A1","rel":"affiliated_with"}
{"src":"I1","dst":"A2","rel":"affiliated_with"}
{"src":"A1","dst":"P1","rel":"writes"}
{"src":"A2","dst":"P2","rel":"writes"}
{"src":"F1c","dst":"P1","rel":"has_topic"}
)";

inline const char* kF1Query =
    "Can you give me publications by Point Park University authors on stellar populations in "
    "tidal tails";

inline const char* kF1GoldPlan =
    "Institution<Point Park University> -> Author -> Paper ; "
    "Field-of-Study<Stellar Populations> -> Paper";

inline tgr::Tgkb f1() {
    std::istringstream nodes(kF1Nodes), edges(kF1Edges);
    return tgr::Tgkb::load(nodes, edges);
}

} // namespace fixtures
