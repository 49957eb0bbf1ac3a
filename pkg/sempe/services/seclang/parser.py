import re
from typing import List, NamedTuple, Optional, Tuple

from sempe.services.seclang.ast import (
    Assign,
    Ast,
    BinOp,
    CallStmt,
    Const,
    Expr,
    For,
    GlobalDecl,
    If,
    Index,
    Module,
    Procedure,
    Stmt,
    Store,
    UnaryOp,
    Var,
    VarDecl,
    While,
)

KEYWORDS = {"var", "proc", "return", "if", "else", "while", "for", "in", "and", "or", "not"}

_TOKEN_RE = re.compile(
    r"""
    (?P<skip>[ \t\r]+|//[^\n]*|\#[^\n]*)
    |(?P<newline>\n)
    |(?P<int>0[xX][0-9a-fA-F]+|\d+)
    |(?P<name>[A-Za-z_][A-Za-z_0-9]*)
    |(?P<op><<|>>|<=|>=|==|!=|\.\.|[-+*/&|^<>=(){}\[\],;@])
    """,
    re.VERBOSE,
)

_SHIFT_OPS = ("<<", ">>")


class SecLangSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class Token(NamedTuple):
    kind: str  # name, int, op, keyword, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, position = 1, 0, 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        column = position - line_start + 1
        if match is None:
            raise SecLangSyntaxError(f"unexpected character {text[position]!r}", line, column)
        kind = match.lastgroup
        value = match.group()
        position = match.end()
        if kind == "newline":
            line += 1
            line_start = position
        elif kind == "skip":
            continue
        elif kind == "name" and value in KEYWORDS:
            tokens.append(Token("keyword", value, line, column))
        else:
            tokens.append(Token(kind, value, line, column))
    tokens.append(Token("eof", "", line, position - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.position = 0

    # -- token helpers ---------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def _peek(self, offset: int = 1) -> Token:
        index = min(self.position + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def _error(self, message: str, token: Optional[Token] = None) -> SecLangSyntaxError:
        token = token or self.current
        return SecLangSyntaxError(message, token.line, token.column)

    def _at(self, text: str) -> bool:
        return self.current.text == text and self.current.kind in ("op", "keyword")

    def _accept(self, text: str) -> bool:
        if self._at(text):
            self.position += 1
            return True
        return False

    def _expect(self, text: str) -> Token:
        if not self._at(text):
            found = self.current.text or "end of input"
            raise self._error(f"expected {text!r}, found {found!r}")
        token = self.current
        self.position += 1
        return token

    def _name(self) -> Token:
        token = self.current
        if token.kind != "name":
            raise self._error(f"expected a name, found {token.text or 'end of input'!r}")
        self.position += 1
        return token

    def _integer(self) -> int:
        negative = self._accept("-")
        token = self.current
        if token.kind != "int":
            raise self._error("expected an integer literal")
        self.position += 1
        value = int(token.text, 0)
        return -value if negative else value

    # -- top level -------------------------------------------------

    def parse_module(self) -> Module:
        module = Module()
        declared = {}
        while self.current.kind != "eof":
            if self._at("@"):
                self._secret_marker(module, declared)
            elif self._at("var"):
                decl = self._global_decl(secret=False)
                self._declare_global(module, declared, decl)
            elif self._at("proc"):
                proc = self._procedure()
                if proc.name in module.procedures:
                    raise SecLangSyntaxError(f"duplicate procedure {proc.name}", proc.line, proc.column)
                module.procedures[proc.name] = proc
            else:
                raise self._error(f"expected 'var', 'proc' or '@secret', found {self.current.text!r}")
        return module

    def _declare_global(self, module: Module, declared: dict, decl: GlobalDecl) -> None:
        if decl.name in declared:
            raise SecLangSyntaxError(f"duplicate global {decl.name}", decl.line, decl.column)
        declared[decl.name] = decl
        module.globals.append(decl)

    def _secret_marker(self, module: Module, declared: dict) -> None:
        self._expect("@")
        marker = self._name()
        if marker.text != "secret":
            raise self._error(f"unknown annotation @{marker.text}", marker)
        if self._at("var"):
            decl = self._global_decl(secret=True)
            self._declare_global(module, declared, decl)
            return
        while True:
            token = self._name()
            if token.text in declared:
                declared[token.text].secret = True
            else:
                decl = GlobalDecl(token.text, secret=True, line=token.line, column=token.column)
                self._declare_global(module, declared, decl)
            if not self._accept(","):
                break
        self._expect(";")

    def _global_decl(self, secret: bool) -> GlobalDecl:
        self._expect("var")
        token = self._name()
        decl = GlobalDecl(token.text, secret=secret, line=token.line, column=token.column)
        if self._accept("["):
            size_token = self.current
            size = self._integer()
            if size <= 0:
                raise self._error("array size must be positive", size_token)
            decl.size = size
            self._expect("]")
        if self._accept("="):
            if decl.size is not None:
                self._expect("{")
                values: List[int] = []
                if not self._at("}"):
                    values.append(self._integer())
                    while self._accept(","):
                        values.append(self._integer())
                self._expect("}")
                if len(values) > decl.size:
                    raise SecLangSyntaxError(
                        f"{len(values)} initializers for array {decl.name} of size {decl.size}",
                        token.line,
                        token.column,
                    )
                decl.init = values
            else:
                decl.init = [self._integer()]
        self._expect(";")
        return decl

    def _procedure(self) -> Procedure:
        self._expect("proc")
        token = self._name()
        self._expect("(")
        params: List[str] = []
        if not self._at(")"):
            params.append(self._name().text)
            while self._accept(","):
                params.append(self._name().text)
        self._expect(")")
        if len(set(params)) != len(params):
            raise self._error(f"duplicate parameter in {token.text}", token)
        self._expect("{")
        body: List[Stmt] = []
        result: Optional[Expr] = None
        while not self._at("}"):
            if self._accept("return"):
                result = self._expr()
                self._expect(";")
                if not self._at("}"):
                    raise self._error("return must be the last statement of a procedure")
                break
            body.append(self._statement())
        self._expect("}")
        return Procedure(token.text, params, body, result, token.line, token.column)

    # -- statements ------------------------------------------------

    def _block(self) -> List[Stmt]:
        self._expect("{")
        body: List[Stmt] = []
        while not self._at("}"):
            if self.current.kind == "eof":
                raise self._error("unterminated block")
            if self._at("return"):
                raise self._error("return is only allowed at the end of a procedure")
            body.append(self._statement())
        self._expect("}")
        return body

    def _statement(self) -> Stmt:
        token = self.current
        if self._accept("var"):
            name = self._name()
            if self._accept("["):
                size_token = self.current
                size = self._integer()
                if size <= 0:
                    raise self._error("array size must be positive", size_token)
                self._expect("]")
                if self._at("="):
                    raise self._error("local arrays cannot have initializers")
                self._expect(";")
                return VarDecl(name.text, None, token.line, size=size)
            if self._accept("="):
                call = self._maybe_call(name.text, declare=True, line=token.line)
                if call is not None:
                    return call
                init = self._expr()
                self._expect(";")
                return VarDecl(name.text, init, token.line)
            self._expect(";")
            return VarDecl(name.text, None, token.line)
        if self._accept("if"):
            return self._if_rest(token)
        if self._accept("while"):
            cond = self._expr()
            return While(cond, self._block(), token.line)
        if self._accept("for"):
            var = self._name()
            self._expect("in")
            lo = self._expr()
            self._expect("..")
            hi = self._expr()
            return For(var.text, lo, hi, self._block(), token.line)
        if token.kind == "name":
            if self._peek().text == "(":
                call = self._call(None, False, token.line)
                self._expect(";")
                return call
            self.position += 1
            if self._accept("["):
                index = self._expr()
                self._expect("]")
                self._expect("=")
                value = self._expr()
                self._expect(";")
                return Store(token.text, index, value, token.line)
            self._expect("=")
            call = self._maybe_call(token.text, declare=False, line=token.line)
            if call is not None:
                return call
            value = self._expr()
            self._expect(";")
            return Assign(token.text, value, token.line)
        raise self._error(f"unexpected {token.text or 'end of input'!r}")

    def _if_rest(self, token: Token) -> If:
        cond = self._expr()
        then = self._block()
        other: List[Stmt] = []
        if self._accept("else"):
            if self._at("if"):
                nested = self.current
                self.position += 1
                other = [self._if_rest(nested)]
            else:
                other = self._block()
        return If(cond, then, other, token.line)

    def _maybe_call(self, target: str, declare: bool, line: int) -> Optional[CallStmt]:
        if self.current.kind == "name" and self._peek().text == "(":
            call = self._call(target, declare, line)
            self._expect(";")
            return call
        return None

    def _call(self, target: Optional[str], declare: bool, line: int) -> CallStmt:
        name = self._name()
        self._expect("(")
        args: List[Expr] = []
        if not self._at(")"):
            args.append(self._expr())
            while self._accept(","):
                args.append(self._expr())
        self._expect(")")
        return CallStmt(name.text, args, target, declare, line, name.column)

    # -- expressions -----------------------------------------------

    def _expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        left = self._and()
        while self._accept("or"):
            left = BinOp("or", left, self._and())
        return left

    def _and(self) -> Expr:
        left = self._not()
        while self._accept("and"):
            left = BinOp("and", left, self._not())
        return left

    def _not(self) -> Expr:
        if self._accept("not"):
            return UnaryOp("not", self._not())
        return self._compare()

    def _compare(self) -> Expr:
        left = self._bitor()
        for op in ("<=", ">=", "==", "!=", "<", ">"):
            if self._at(op):
                self.position += 1
                return BinOp(op, left, self._bitor())
        return left

    def _binary_level(self, ops: Tuple[str, ...], operand) -> Expr:
        left = operand()
        while self.current.kind == "op" and self.current.text in ops:
            token = self.current
            self.position += 1
            right = operand()
            if token.text in _SHIFT_OPS + ("/",):
                if not isinstance(right, Const):
                    raise self._error(f"right operand of {token.text!r} must be an integer literal", token)
                if token.text == "/" and right.value == 0:
                    raise self._error("division by constant zero", token)
            left = BinOp(token.text, left, right)
        return left

    def _bitor(self) -> Expr:
        return self._binary_level(("|",), self._bitxor)

    def _bitxor(self) -> Expr:
        return self._binary_level(("^",), self._bitand)

    def _bitand(self) -> Expr:
        return self._binary_level(("&",), self._shift)

    def _shift(self) -> Expr:
        return self._binary_level(_SHIFT_OPS, self._additive)

    def _additive(self) -> Expr:
        return self._binary_level(("+", "-"), self._term)

    def _term(self) -> Expr:
        return self._binary_level(("*", "/"), self._unary)

    def _unary(self) -> Expr:
        if self._accept("-"):
            operand = self._unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return UnaryOp("-", operand)
        return self._primary()

    def _primary(self) -> Expr:
        token = self.current
        if token.kind == "int":
            self.position += 1
            return Const(int(token.text, 0))
        if token.kind == "name":
            self.position += 1
            if self._at("("):
                raise self._error("calls are only allowed as statements", token)
            if self._accept("["):
                index = self._expr()
                self._expect("]")
                return Index(token.text, index)
            return Var(token.text)
        if self._accept("("):
            inner = self._expr()
            self._expect(")")
            return inner
        raise self._error(f"expected an expression, found {token.text or 'end of input'!r}")


def parse_module(text: str) -> Module:
    return _Parser(text).parse_module()


def parse(text: str) -> Ast:
    """Parse SecLang source into a resolved Ast with every call inlined into main."""
    from sempe.services.seclang.resolver import resolve

    return resolve(parse_module(text), text)
