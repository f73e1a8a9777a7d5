#include "qagg/core.hpp"

#include <cmath>

namespace qagg {

FunctionDictionary::FunctionDictionary(Matrix values)
    : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ContractViolation("dictionary needs n >= 1 rows and M >= 1 columns");
  }
  if (!values_.allFinite()) {
    throw ContractViolation("dictionary has non-finite entries");
  }
}

ResponseVector::ResponseVector(Vector values) : values_(std::move(values)) {
  if (values_.size() < 1) throw ContractViolation("empty response vector");
  if (!values_.allFinite()) {
    throw ContractViolation("response vector has non-finite entries");
  }
}

SimplexWeights::SimplexWeights(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw ContractViolation("empty weight vector");
  for (Index j = 0; j < weights_.size(); ++j) {
    const double w = weights_[j];
    if (!std::isfinite(w) || w < 0.0) {
      throw ContractViolation("weight " + std::to_string(j) +
                              " is negative or non-finite");
    }
  }
  const double total = accurate_sum(weights_);
  if (std::abs(total - 1.0) > kSimplexRenormTol) {
    throw ContractViolation("weights sum to " + std::to_string(total) +
                            ", not 1");
  }
  if (total != 1.0) weights_ /= total;
  for (Index j = 0; j < weights_.size(); ++j) {
    if (weights_[j] > 0.0) support_.push_back(j);
  }
}

SimplexWeights SimplexWeights::vertex(Index size, Index j) {
  if (j < 0 || j >= size) throw ContractViolation("vertex index out of range");
  Vector w = Vector::Zero(size);
  w[j] = 1.0;
  return SimplexWeights(std::move(w));
}

SimplexWeights SimplexWeights::uniform(Index size) {
  if (size < 1) throw ContractViolation("uniform weights need size >= 1");
  return SimplexWeights(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

void require_compatible(const FunctionDictionary& dict,
                        const ResponseVector& y) {
  if (y.size() != dict.num_points()) {
    throw ContractViolation("response has " + std::to_string(y.size()) +
                            " entries but dictionary has " +
                            std::to_string(dict.num_points()) + " rows");
  }
}

void require_compatible(const FunctionDictionary& dict,
                        const SimplexWeights& lambda) {
  if (lambda.size() != dict.num_functions()) {
    throw ContractViolation("weights have " + std::to_string(lambda.size()) +
                            " entries but dictionary has " +
                            std::to_string(dict.num_functions()) + " columns");
  }
}

Vector combine(const FunctionDictionary& dict, const SimplexWeights& lambda) {
  require_compatible(dict, lambda);
  Vector out = Vector::Zero(dict.num_points());
  for (Index j : lambda.support()) {
    out.noalias() += lambda[j] * dict.column(j);
  }
  return out;
}

Vector per_function_empirical_mse(const FunctionDictionary& dict,
                                  const ResponseVector& y) {
  require_compatible(dict, y);
  Vector out(dict.num_functions());
  for (Index j = 0; j < dict.num_functions(); ++j) {
    out[j] = mse(y.values(), dict.column(j));
  }
  return out;
}

}  // namespace qagg
