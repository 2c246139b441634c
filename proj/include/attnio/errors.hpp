#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attnio {

/** Operand shapes do not admit the requested operation. */
class DimensionMismatch : public std::runtime_error {
public:
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

/** A score magnitude exceeded the exp() guard threshold. */
class NumericOverflow : public std::runtime_error {
public:
    explicit NumericOverflow(const std::string& what) : std::runtime_error(what) {}
};

/** Admitting a region would push cache residency past capacity. */
class CacheOverflow : public std::runtime_error {
public:
    explicit CacheOverflow(const std::string& what) : std::runtime_error(what) {}
};

/** A region with this tag is already resident. */
class DuplicateTag : public std::runtime_error {
public:
    explicit DuplicateTag(const std::string& what) : std::runtime_error(what) {}
};

/** No resident region carries this tag. */
class UnknownTag : public std::runtime_error {
public:
    explicit UnknownTag(const std::string& what) : std::runtime_error(what) {}
};

/** The cache capacity is below the kernel's structural minimum. */
class CacheTooSmall : public std::runtime_error {
public:
    explicit CacheTooSmall(const std::string& what) : std::runtime_error(what) {}
};

/** The requested instance exceeds the configured tiny-instance cap. */
class SizeLimit : public std::runtime_error {
public:
    explicit SizeLimit(const std::string& what) : std::runtime_error(what) {}
};

/** A pebble-game move violates the rules; carries the move index. */
class IllegalMove : public std::runtime_error {
public:
    IllegalMove(std::size_t move_index, const std::string& reason)
        : std::runtime_error("illegal move at index " + std::to_string(move_index) + ": " + reason),
          index(move_index),
          reason(reason) {}

    std::size_t index;
    std::string reason;
};

/** The trace ended without blue pebbles on all output nodes. */
class IncompleteGame : public std::runtime_error {
public:
    explicit IncompleteGame(const std::string& what) : std::runtime_error(what) {}
};

/** Fewer data points than a fit requires. */
class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace attnio
