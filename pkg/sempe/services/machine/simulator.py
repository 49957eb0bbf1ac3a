import logging
from abc import ABC, abstractmethod
from typing import List, Literal, Optional, Sequence

from sempe.config import get_settings
from sempe.schemas import ExecutionResult, Trap
from sempe.services.isa.arith import div_trunc, shl, shr, slt, wrap64
from sempe.services.isa.opcodes import BRANCH_OPCODES, Opcode
from sempe.services.isa.program import Instruction, Program
from sempe.services.isa.validate import Diagnostic, validate
from sempe.services.machine.jbtable import JbEntry, JbTable, Outcome
from sempe.services.machine.spm import Snapshot, Spm, register_indices
from sempe.services.machine.timing import CacheModel, TimingModel

logger = logging.getLogger(__name__)

MachineMode = Literal["sempe", "legacy"]

TRAP_JBTABLE_OVERFLOW = "jbtable_overflow"
TRAP_UNMATCHED_EOSJMP = "unmatched_eosjmp"
TRAP_STEP_LIMIT = "step_limit_exceeded"
TRAP_MEMORY_BOUNDS = "memory_out_of_bounds"
TRAP_RETURN_UNDERFLOW = "return_stack_underflow"
TRAP_INVALID_PC = "invalid_pc"

_ALU = {
    Opcode.ADD: lambda a, b: wrap64(a + b),
    Opcode.SUB: lambda a, b: wrap64(a - b),
    Opcode.MUL: lambda a, b: wrap64(a * b),
    Opcode.AND: lambda a, b: wrap64(a & b),
    Opcode.OR: lambda a, b: wrap64(a | b),
    Opcode.XOR: lambda a, b: wrap64(a ^ b),
    Opcode.SLT: slt,
}
_ALU_IMM = {
    Opcode.DIVC: div_trunc,
    Opcode.SHL: shl,
    Opcode.SHR: shr,
}


class MachineTrap(RuntimeError):
    def __init__(self, kind: str, pc: int):
        super().__init__(f"{kind} at pc {pc}")
        self.kind = kind
        self.pc = pc


class InvalidProgramError(ValueError):
    def __init__(self, diagnostics: List[Diagnostic]):
        super().__init__("; ".join(str(item) for item in diagnostics))
        self.diagnostics = diagnostics


class ExecutionObserver(ABC):
    @abstractmethod
    def on_event(self, kind: str, pc: int, addr: Optional[int], cycle: int) -> None:
        raise NotImplementedError


class MachineState:
    def __init__(
        self,
        program: Program,
        memory: Sequence[int],
        registers: Optional[Sequence[int]] = None,
        mode: MachineMode = "sempe",
        timing: Optional[TimingModel] = None,
        capacity: int = 30,
        observer: Optional[ExecutionObserver] = None,
    ):
        if mode not in ("sempe", "legacy"):
            raise ValueError(f"Unsupported machine mode: {mode}")
        self.program = program
        self.mode = mode
        self.timing = timing or TimingModel()
        self.observer = observer
        self.register_count = program.register_count
        self.regs = [0] * self.register_count
        for index, value in enumerate(registers or ()):
            if index >= self.register_count:
                raise ValueError(f"{len(registers)} initial registers exceed R={self.register_count}")
            self.regs[index] = wrap64(value)
        self.mem = [wrap64(value) for value in memory]
        self.pc = program.entry
        self.jbtable = JbTable(capacity)
        self.spm = Spm(register_count=self.register_count, slots=capacity)
        self.cache = CacheModel(self.timing.cache) if self.timing.cache else None
        self.call_stack: List[int] = []
        self.cycle = 0
        self.committed = 0
        self.drains = 0
        self.max_nesting = 0
        self.halted = False

    # -- bookkeeping -------------------------------------------------

    def _emit(self, kind: str, pc: int, addr: Optional[int] = None) -> None:
        if self.observer is not None:
            self.observer.on_event(kind, pc, addr, self.cycle)

    def _commit(self, pc: int, extra: int = 0) -> None:
        self.cycle += self.timing.base_cpi + extra
        self.committed += 1
        self._emit("commit_pc", pc)

    def _drain(self, pc: int) -> None:
        self.cycle += self.timing.drain_penalty
        self.drains += 1
        self._emit("drain", pc)

    def _current_snapshot(self) -> Optional[Snapshot]:
        if self.jbtable.depth == 0:
            return None
        return self.spm.slot(self.jbtable.depth - 1)

    def _write_reg(self, index: int, value: int) -> None:
        self.regs[index] = wrap64(value)
        snapshot = self._current_snapshot()
        if snapshot is None:
            return
        if self.jbtable.top().jb:
            snapshot.modified_t |= 1 << index
        else:
            snapshot.modified_nt |= 1 << index

    def _address(self, pc: int, base: int, offset: int) -> int:
        address = self.regs[base] + offset
        if not 0 <= address < len(self.mem):
            raise MachineTrap(TRAP_MEMORY_BOUNDS, pc)
        return address

    def _memory_cost(self, address: int) -> int:
        return self.cache.access(address) if self.cache is not None else 0

    # -- execution ---------------------------------------------------

    def step(self) -> None:
        pc = self.pc
        if not 0 <= pc < len(self.program.instructions):
            raise MachineTrap(TRAP_INVALID_PC, pc)
        instruction = self.program.instructions[pc]
        opcode = instruction.opcode

        if self.mode == "sempe":
            if instruction.secure and opcode in BRANCH_OPCODES:
                self.step_sjmp(instruction)
                return
            if opcode is Opcode.EOSJMP:
                self.step_eosjmp(instruction)
                return
        if opcode is Opcode.CMOV:
            self.step_cmov(instruction)
            return

        next_pc = pc + 1
        if opcode in _ALU:
            self._commit(pc)
            self._write_reg(instruction.dst, _ALU[opcode](self.regs[instruction.src1], self.regs[instruction.src2]))
        elif opcode in _ALU_IMM:
            self._commit(pc)
            self._write_reg(instruction.dst, _ALU_IMM[opcode](self.regs[instruction.src1], instruction.imm))
        elif opcode is Opcode.LDI:
            self._commit(pc)
            self._write_reg(instruction.dst, instruction.imm)
        elif opcode is Opcode.MOV:
            self._commit(pc)
            self._write_reg(instruction.dst, self.regs[instruction.src1])
        elif opcode is Opcode.LD:
            address = self._address(pc, instruction.src1, instruction.imm)
            self._commit(pc, self._memory_cost(address))
            self._emit("mem_read", pc, address)
            self._write_reg(instruction.dst, self.mem[address])
        elif opcode is Opcode.ST:
            address = self._address(pc, instruction.src1, instruction.imm)
            self._commit(pc, self._memory_cost(address))
            self._emit("mem_write", pc, address)
            self.mem[address] = self.regs[instruction.src2]
        elif opcode is Opcode.JMP:
            self._commit(pc)
            next_pc = instruction.imm
        elif opcode in BRANCH_OPCODES:
            self._commit(pc)
            zero = self.regs[instruction.src1] == 0
            if zero == (opcode is Opcode.BZ):
                next_pc = instruction.imm
        elif opcode is Opcode.CALL:
            self._commit(pc)
            self.call_stack.append(pc + 1)
            next_pc = instruction.imm
        elif opcode is Opcode.RET:
            if not self.call_stack:
                raise MachineTrap(TRAP_RETURN_UNDERFLOW, pc)
            self._commit(pc)
            next_pc = self.call_stack.pop()
        elif opcode is Opcode.HALT:
            self._commit(pc)
            self.halted = True
            next_pc = pc
        else:
            # NOP, and EOSJMP outside sempe mode
            self._commit(pc)
        self.pc = next_pc

    def step_sjmp(self, instruction: Instruction) -> None:
        pc = self.pc
        if self.jbtable.full:
            raise MachineTrap(TRAP_JBTABLE_OVERFLOW, pc)
        zero = self.regs[instruction.src1] == 0
        taken = zero == (instruction.opcode is Opcode.BZ)
        self._commit(pc)
        self._drain(pc)
        self.jbtable.push(JbEntry(next_pc=instruction.imm, outcome=Outcome.T if taken else Outcome.NT, valid=True))
        level = self.jbtable.depth - 1
        self.max_nesting = max(self.max_nesting, self.jbtable.depth)

        self.spm.open_slot(level, self.regs)
        self.cycle += self.timing.spm_transfer(8 * self.register_count)
        for index in range(self.register_count):
            self._emit("spm_write", pc, self.spm.pre_address(level, index))
        self.pc = pc + 1

    def step_eosjmp(self, instruction: Instruction) -> None:
        del instruction
        pc = self.pc
        entry = self.jbtable.top()
        if entry is None:
            raise MachineTrap(TRAP_UNMATCHED_EOSJMP, pc)
        level = self.jbtable.depth - 1
        snapshot = self.spm.slot(level)
        self._commit(pc)

        if not entry.jb:
            saved = register_indices(snapshot.modified_nt)
            for index in saved:
                snapshot.regs_nt[index] = self.regs[index]
            written = 8 * len(saved) + self.spm.bitvector_bytes
            self.spm.bytes_written += written
            self.cycle += self.timing.spm_transfer(written)
            for index in saved:
                self._emit("spm_write", pc, self.spm.nt_address(level, index))
            self._emit("spm_write", pc, self.spm.vector_address(level))

            # T-path starts from the pre-region register state
            self.spm.bytes_read += 8 * len(saved)
            self.cycle += self.timing.spm_transfer(8 * len(saved))
            for index in saved:
                self.regs[index] = snapshot.regs_pre[index]
                self._emit("spm_read", pc, self.spm.pre_address(level, index))

            self._drain(pc)
            entry.jb = True
            self.pc = entry.next_pc
            return

        self.restore_registers(entry, snapshot)
        self.jbtable.pop()
        self.spm.close_slot(level)
        parent = self._current_snapshot()
        if parent is not None:
            if self.jbtable.top().jb:
                parent.modified_t |= snapshot.changed()
            else:
                parent.modified_nt |= snapshot.changed()
        self._drain(pc)
        self.pc = pc + 1

    def restore_registers(self, entry: JbEntry, snapshot: Snapshot) -> None:
        pc = self.pc
        level = self.jbtable.depth - 1
        restored = register_indices(snapshot.changed())
        self.spm.bytes_read += 8 * len(restored)
        self.cycle += self.timing.spm_transfer(8 * len(restored))
        for index in restored:
            from_nt = bool(snapshot.modified_nt >> index & 1)
            if from_nt:
                address = self.spm.nt_address(level, index)
                candidate = snapshot.regs_nt[index]
            else:
                address = self.spm.pre_address(level, index)
                candidate = snapshot.regs_pre[index]
            self._emit("spm_read", pc, address)
            if entry.outcome is Outcome.NT:
                self.regs[index] = candidate
            else:
                self.regs[index] = self.regs[index]

    def step_cmov(self, instruction: Instruction) -> None:
        pc = self.pc
        self._commit(pc)
        predicate = self.regs[instruction.src1]
        value = self.regs[instruction.src2] if predicate != 0 else self.regs[instruction.dst]
        self._write_reg(instruction.dst, value)
        self.pc = pc + 1

    def execute(self, step_limit: int) -> Optional[Trap]:
        try:
            while not self.halted:
                if self.committed >= step_limit:
                    raise MachineTrap(TRAP_STEP_LIMIT, self.pc)
                self.step()
        except MachineTrap as trap:
            logger.debug("machine trap %s at pc %d after %d cycles", trap.kind, trap.pc, self.cycle)
            self._emit("trap", trap.pc)
            return Trap(kind=trap.kind, pc=trap.pc)
        return None

    def result(self, trap: Optional[Trap] = None) -> ExecutionResult:
        return ExecutionResult(
            final_regs=list(self.regs),
            final_mem=list(self.mem),
            cycles=self.cycle,
            committed_instructions=self.committed,
            trap=trap,
            drains=self.drains,
            spm_bytes_read=self.spm.bytes_read,
            spm_bytes_written=self.spm.bytes_written,
            cache_hits=self.cache.hits if self.cache else 0,
            cache_misses=self.cache.misses if self.cache else 0,
            max_nesting=self.max_nesting,
        )


def run(
    program: Program,
    init_mem: Optional[Sequence[int]] = None,
    init_regs: Optional[Sequence[int]] = None,
    mode: MachineMode = "sempe",
    timing: Optional[TimingModel] = None,
    observer: Optional[ExecutionObserver] = None,
    capacity: Optional[int] = None,
    step_limit: Optional[int] = None,
) -> ExecutionResult:
    diagnostics = validate(program)
    if diagnostics:
        raise InvalidProgramError(diagnostics)
    settings = get_settings()
    timing = timing or TimingModel.from_settings(settings)
    capacity = settings.jbtable_capacity if capacity is None else capacity
    step_limit = settings.step_limit if step_limit is None else step_limit

    memory = list(program.initial_memory()) if init_mem is None else list(init_mem)
    if len(memory) < program.data_size:
        memory.extend([0] * (program.data_size - len(memory)))

    state = MachineState(
        program,
        memory,
        registers=init_regs,
        mode=mode,
        timing=timing,
        capacity=capacity,
        observer=observer,
    )
    trap = state.execute(step_limit)
    return state.result(trap)


def run_legacy(
    program: Program,
    init_mem: Optional[Sequence[int]] = None,
    init_regs: Optional[Sequence[int]] = None,
    timing: Optional[TimingModel] = None,
    observer: Optional[ExecutionObserver] = None,
    step_limit: Optional[int] = None,
) -> ExecutionResult:
    return run(
        program,
        init_mem=init_mem,
        init_regs=init_regs,
        mode="legacy",
        timing=timing,
        observer=observer,
        step_limit=step_limit,
    )
