/// Token kinds of the `.ddseq` language. Anything that is not punctuation,
/// whitespace or a comment is a `Word`; literals are validated later.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Semi,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Word(w) => format!("`{w}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

/// Splits source text into tokens. Never fails: every character either
/// belongs to a token, is whitespace, or sits in a comment.
pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = text.chars().peekable();
    let mut word = String::new();
    let mut word_start = (1, 1);

    let flush = |word: &mut String, start: (usize, usize), out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token {
                tok: Tok::Word(std::mem::take(word)),
                line: start.0,
                column: start.1,
            });
        }
    };

    while let Some(c) = chars.next() {
        let here = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
        let punct = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = punct {
            flush(&mut word, word_start, &mut out);
            out.push(Token {
                tok,
                line: here.0,
                column: here.1,
            });
        } else if c == '#' {
            flush(&mut word, word_start, &mut out);
            while let Some(&n) = chars.peek() {
                if n == '\n' {
                    break;
                }
                chars.next();
                column += 1;
            }
        } else if c.is_whitespace() {
            flush(&mut word, word_start, &mut out);
        } else {
            if word.is_empty() {
                word_start = here;
            }
            word.push(c);
        }
    }
    flush(&mut word, word_start, &mut out);
    out
}
