"""Two's-complement 64-bit arithmetic shared by the simulator and the
SecLang reference interpreter."""

MASK64 = (1 << 64) - 1
SIGN64 = 1 << 63
INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


def wrap64(value: int) -> int:
    value &= MASK64
    if value & SIGN64:
        value -= 1 << 64
    return value


def div_trunc(value: int, divisor: int) -> int:
    if divisor == 0:
        raise ZeroDivisionError("constant divisor must be nonzero")
    quotient = abs(value) // abs(divisor)
    if (value < 0) != (divisor < 0):
        quotient = -quotient
    return wrap64(quotient)


def shl(value: int, amount: int) -> int:
    return wrap64(value << (amount & 63))


def shr(value: int, amount: int) -> int:
    # logical shift on the unsigned bit pattern
    return wrap64((value & MASK64) >> (amount & 63))


def slt(left: int, right: int) -> int:
    return 1 if left < right else 0


def boolean(value: int) -> int:
    return 1 if value != 0 else 0


def in_int64(value: int) -> bool:
    return INT64_MIN <= value <= INT64_MAX
