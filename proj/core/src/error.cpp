#include "damr/error.hpp"

namespace damr {

void throw_precondition(const std::string& what) { throw PreconditionError(what); }

}  // namespace damr
