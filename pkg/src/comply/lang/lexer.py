"""Tokenizer for the constraint and scenario file formats.

Line breaks are insignificant (tokens carry line/column for diagnostics);
`#` starts a comment running to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

PUNCT = {
    "{": "LBRACE",
    "}": "RBRACE",
    "(": "LPAREN",
    ")": "RPAREN",
    ":": "COLON",
    ",": "COMMA",
    ".": "DOT",
    "=": "EQ",
    "<": "LT",
    ">": "GT",
    "+": "PLUS",
    "-": "MINUS",
    "*": "STAR",
}

MULTI = {
    "->": "ARROW",
    "<=": "LE",
    ">=": "GE",
    "!=": "NE",
}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | INT | DECIMAL | STRING | punct kinds | EOF | ERROR
    text: str
    line: int
    column: int
    value: object = None


class Lexer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.column = 1

    def _advance(self, n=1):
        for _ in range(n):
            if self.pos < len(self.source):
                if self.source[self.pos] == "\n":
                    self.line += 1
                    self.column = 1
                else:
                    self.column += 1
                self.pos += 1

    def tokens(self) -> list:
        out = []
        src = self.source
        while True:
            while self.pos < len(src) and src[self.pos] in " \t\r\n":
                self._advance()
            if self.pos < len(src) and src[self.pos] == "#":
                while self.pos < len(src) and src[self.pos] != "\n":
                    self._advance()
                continue
            if self.pos >= len(src):
                out.append(Token("EOF", "", self.line, self.column))
                return out
            line, col = self.line, self.column
            ch = src[self.pos]
            two = src[self.pos : self.pos + 2]
            if two in MULTI:
                self._advance(2)
                out.append(Token(MULTI[two], two, line, col))
                continue
            if ch == '"':
                self._advance()
                start = self.pos
                while self.pos < len(src) and src[self.pos] not in '"\n':
                    self._advance()
                text = src[start : self.pos]
                if self.pos < len(src) and src[self.pos] == '"':
                    self._advance()
                    out.append(Token("STRING", text, line, col, value=text))
                else:
                    out.append(Token("ERROR", text, line, col, value="unterminated string"))
                continue
            if ch.isdigit():
                start = self.pos
                while self.pos < len(src) and src[self.pos].isdigit():
                    self._advance()
                # decimal only when a digit follows the dot (`1.x` stays INT DOT IDENT)
                if (
                    self.pos + 1 < len(src)
                    and src[self.pos] == "."
                    and src[self.pos + 1].isdigit()
                ):
                    self._advance()
                    while self.pos < len(src) and src[self.pos].isdigit():
                        self._advance()
                    text = src[start : self.pos]
                    out.append(Token("DECIMAL", text, line, col, value=Fraction(text)))
                else:
                    text = src[start : self.pos]
                    out.append(Token("INT", text, line, col, value=int(text)))
                continue
            if ch.isalpha() or ch == "_":
                start = self.pos
                while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
                    self._advance()
                text = src[start : self.pos]
                out.append(Token("IDENT", text, line, col, value=text))
                continue
            if ch in PUNCT:
                self._advance()
                out.append(Token(PUNCT[ch], ch, line, col))
                continue
            self._advance()
            out.append(Token("ERROR", ch, line, col, value=f"unexpected character {ch!r}"))


def tokenize(source: str) -> list:
    return Lexer(source).tokens()
