"""SecLang source for the nested secret-branch microbenchmark.

Each iteration walks a chain of W secret branches. Branch k keeps one
workload instance in its fall-through arm and branch k+1 in its taken
arm; the last branch has a workload instance in both arms. A machine
running every path therefore executes W+1 instances per iteration
while a conventional one executes exactly one.
"""

import random
from string import Template
from typing import Dict, List, Optional

from sempe.schemas import BenchSpec

DATA_WORDS = 64

DEFAULT_SIZES: Dict[str, int] = {
    "fibonacci": 400,
    "ones": 6,
    "quicksort": 32,
    "queens": 3,
}

MAX_SIZES: Dict[str, int] = {
    "fibonacci": 1_000_000,
    "ones": DATA_WORDS,
    "quicksort": DATA_WORDS,
    "queens": DATA_WORDS // 8,
}

_WORKLOADS: Dict[str, Template] = {
    "fibonacci": Template(
        """\
proc fibonacci(seed) {
    var a = seed & 7;
    var b = 1;
    for t in 0 .. $size {
        var next = a + b;
        a = b;
        b = next;
    }
    return a;
}
"""
    ),
    "ones": Template(
        """\
proc ones(seed) {
    var count = 0;
    for w in 0 .. $size {
        var word = data[w] ^ seed;
        for bit in 0 .. 64 {
            count = count + (word & 1);
            word = word >> 1;
        }
    }
    return count;
}
"""
    ),
    "quicksort": Template(
        """\
proc quicksort(seed) {
    var a[$size];
    var stack[$stack];
    for i in 0 .. $size {
        a[i] = data[i] ^ seed;
    }
    stack[0] = 0;
    stack[1] = $last;
    var top = 2;
    for step in 0 .. $steps {
        if top > 0 {
            top = top - 2;
            var lo = stack[top];
            var hi = stack[top + 1];
            if lo < hi {
                var pivot = a[hi];
                var store = lo;
                for j in lo .. hi {
                    if a[j] < pivot {
                        var swap = a[store];
                        a[store] = a[j];
                        a[j] = swap;
                        store = store + 1;
                    }
                }
                var moved = a[store];
                a[store] = a[hi];
                a[hi] = moved;
                stack[top] = lo;
                stack[top + 1] = store - 1;
                stack[top + 2] = store + 1;
                stack[top + 3] = hi;
                top = top + 4;
            }
        }
    }
    return a[0] + a[$middle] * 3 + a[$last] * 5;
}
"""
    ),
    "queens": Template(
        """\
proc queens(seed) {
    var board[8];
    var conflicts = 0;
    for g in 0 .. $size {
        for q in 0 .. 8 {
            board[q] = (data[g * 8 + q] ^ seed) & 7;
        }
        for x in 0 .. 8 {
            for y in x + 1 .. 8 {
                var dx = y - x;
                var dy = board[y] - board[x];
                conflicts = conflicts + (dy == 0) + (dy == dx) + (dy == 0 - dx);
            }
        }
    }
    return conflicts;
}
"""
    ),
}


class BenchSpecError(ValueError):
    pass


def workload_size(spec: BenchSpec) -> int:
    size = spec.workload_size if spec.workload_size is not None else DEFAULT_SIZES[spec.workload]
    if size > MAX_SIZES[spec.workload]:
        raise BenchSpecError(f"{spec.workload} supports a workload size of at most {MAX_SIZES[spec.workload]}")
    return size


def secret_names(spec: BenchSpec) -> List[str]:
    return [f"s{index}" for index in range(1, spec.width + 1)]


def ideal_paths(spec: BenchSpec, mode: str) -> int:
    """Workload instances a mode executes per iteration."""
    return spec.width + 1 if mode in ("sempe", "cte") else 1


def _arm(spec: BenchSpec, arm: int, indent: str) -> List[str]:
    lines = [
        f"{indent}var r = {spec.workload}(it);",
        f"{indent}acc = acc + r;",
    ]
    if arm % 2 == 1:
        # unbalanced arms make the conventional run's timing path dependent
        lines.append(f"{indent}acc = acc ^ {arm};")
    return lines


def _chain(spec: BenchSpec, level: int, indent: str) -> List[str]:
    inner = indent + "    "
    lines = [f"{indent}if s{level} {{"]
    lines.extend(_arm(spec, level - 1, inner))
    lines.append(f"{indent}}} else {{")
    if level == spec.width:
        lines.extend(_arm(spec, level, inner))
    else:
        lines.extend(_chain(spec, level + 1, inner))
    lines.append(f"{indent}}}")
    return lines


def generate(spec: BenchSpec, capacity: Optional[int] = None) -> str:
    if capacity is not None and spec.width > capacity:
        raise BenchSpecError(f"width {spec.width} needs {spec.width} nested secure branches, capacity is {capacity}")
    size = workload_size(spec)
    rng = random.Random(spec.seed)
    secrets = [rng.randint(0, 1) for _ in range(spec.width)]
    data = [rng.randrange(1 << 16) for _ in range(DATA_WORDS)]

    workload = _WORKLOADS[spec.workload].substitute(
        size=size,
        stack=2 * size + 8,
        steps=2 * size + 1,
        last=size - 1,
        middle=size // 2,
    )
    lines = [
        f"// {spec.workload} x{size}, {spec.iterations} iterations, width {spec.width}, seed {spec.seed}",
    ]
    lines.extend(f"@secret var {name} = {value};" for name, value in zip(secret_names(spec), secrets))
    lines.append("var acc;")
    lines.append(f"var data[{DATA_WORDS}] = {{{', '.join(str(value) for value in data)}}};")
    lines.append("")
    lines.append(workload.rstrip("\n"))
    lines.append("")
    lines.append("proc main() {")
    lines.append(f"    for it in 0 .. {spec.iterations} {{")
    lines.extend(_chain(spec, 1, "        "))
    lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"
