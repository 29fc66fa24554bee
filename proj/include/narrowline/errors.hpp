#pragma once

#include <stdexcept>
#include <string>

namespace narrowline {

/// Base class for every error raised by the toolkit. The CLI maps these to
/// exit status 1 and prints what() verbatim.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error
{
  public:
    using Error::Error;
};

/// Malformed catalog or data file; the message carries line/key context.
class ParseError : public Error
{
  public:
    using Error::Error;
};

/// A loaded record violates a type invariant; the message names the field.
class InvariantError : public Error
{
  public:
    using Error::Error;
};

/// A tabulated quantity the operation needs is absent for this record.
class MissingDataError : public Error
{
  public:
    using Error::Error;
};

/// Transform grid too coarse or too short for the requested line set.
class ResolutionError : public Error
{
  public:
    using Error::Error;
};

/// A threshold scan never crossed its threshold on the supplied grid.
class UnboundedError : public Error
{
  public:
    using Error::Error;
};

/// Iterative fit did not converge within its iteration budget.
class ConvergenceError : public Error
{
  public:
    using Error::Error;
};

} // namespace narrowline
