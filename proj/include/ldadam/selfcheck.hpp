#pragma once

#include <iosfwd>

namespace ldadam {

// Property battery behind the `check` subcommand: gradient oracles against
// finite differences, degenerate-rank optimizer equivalences, the
// error-feedback identity, lemma monitors on short runs, memory-table
// arithmetic, and run determinism. Prints one line per check.
// Returns true when every check passes.
bool run_selfcheck(std::ostream& os);

} // namespace ldadam
