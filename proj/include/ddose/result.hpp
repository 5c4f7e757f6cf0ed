// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace ddose {

/// Operational error carried by Result<T>. `code` is a short stable slug
/// ("unknown_patient", "transport", ...) suitable for dispatch; `message`
/// is for humans and logs.
struct Error {
    std::string code;
    std::string message;
};

/// Minimal expected-style carrier for operations that can fail at runtime.
/// Precondition violations (programming errors) throw instead.
template <typename T>
class Result {
public:
    using value_type = T;

    Result(T value) : value_(std::move(value)) {}
    Result(Error error) : error_(std::move(error)) {}

    static Result failure(std::string code, std::string message) {
        return Result(Error{std::move(code), std::move(message)});
    }

    bool ok() const { return value_.has_value(); }
    explicit operator bool() const { return ok(); }

    const T& value() const& {
        if (!value_) throw std::logic_error("Result::value on error: " + error_.message);
        return *value_;
    }
    T& value() & {
        if (!value_) throw std::logic_error("Result::value on error: " + error_.message);
        return *value_;
    }
    T&& take() && {
        if (!value_) throw std::logic_error("Result::take on error: " + error_.message);
        return std::move(*value_);
    }

    const Error& error() const {
        if (value_) throw std::logic_error("Result::error on success");
        return error_;
    }

private:
    std::optional<T> value_;
    Error error_;
};

template <>
class Result<void> {
public:
    using value_type = void;

    Result() : ok_(true) {}
    Result(Error error) : ok_(false), error_(std::move(error)) {}

    static Result failure(std::string code, std::string message) {
        return Result(Error{std::move(code), std::move(message)});
    }
    static Result success() { return Result(); }

    bool ok() const { return ok_; }
    explicit operator bool() const { return ok_; }

    const Error& error() const {
        if (ok_) throw std::logic_error("Result::error on success");
        return error_;
    }

private:
    bool ok_;
    Error error_;
};

}  // namespace ddose
