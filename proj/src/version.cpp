#include "levy_contract/common.hpp"

namespace levy_contract {

const char* artifact_version() { return LEVY_CONTRACT_VERSION; }

}  // namespace levy_contract
