#pragma once

// Placeholder CLI entry; filled in once the full stack exists.

namespace tiltlab::shell {
inline int cli_run(int, char**) { return 0; }
}  // namespace tiltlab::shell
