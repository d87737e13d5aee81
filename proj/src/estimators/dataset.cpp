#include "dogma/estimators/dataset.hpp"

#include "dogma/core/error.hpp"

namespace dogma {

void Dataset::validate() const {
  require(X.rows() > 0, "Dataset: no observations");
  require(A.size() == X.rows() && Y.size() == X.rows(), "Dataset: row counts disagree");
  require(X.allFinite() && A.allFinite() && Y.allFinite(), "Dataset: non-finite entries");
}

}  // namespace dogma
