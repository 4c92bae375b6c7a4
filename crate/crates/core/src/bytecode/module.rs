use super::code::CodeObject;

/// Host-provided callables, addressed through the global table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Print,
    List,
    Get,
    Set,
    Len,
    Sqrt,
    Float,
    Int,
    Fmt,
    Chr,
    Str,
    Size,
}

impl Builtin {
    pub const ALL: [Builtin; 12] = [
        Builtin::Print,
        Builtin::List,
        Builtin::Get,
        Builtin::Set,
        Builtin::Len,
        Builtin::Sqrt,
        Builtin::Float,
        Builtin::Int,
        Builtin::Fmt,
        Builtin::Chr,
        Builtin::Str,
        Builtin::Size,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Print => "print",
            Builtin::List => "list",
            Builtin::Get => "get",
            Builtin::Set => "set",
            Builtin::Len => "len",
            Builtin::Sqrt => "sqrt",
            Builtin::Float => "float",
            Builtin::Int => "int",
            Builtin::Fmt => "fmt",
            Builtin::Chr => "chr",
            Builtin::Str => "str",
            Builtin::Size => "size",
        }
    }

    /// Fixed argument count; `None` for variadic.
    pub fn arity(self) -> Option<usize> {
        match self {
            Builtin::Print => None,
            Builtin::List | Builtin::Get | Builtin::Fmt => Some(2),
            Builtin::Set => Some(3),
            Builtin::Len
            | Builtin::Sqrt
            | Builtin::Float
            | Builtin::Int
            | Builtin::Chr
            | Builtin::Str
            | Builtin::Size => Some(1),
        }
    }

    pub fn from_index(i: u8) -> Option<Builtin> {
        Builtin::ALL.get(i as usize).copied()
    }

    pub fn index(self) -> u8 {
        Builtin::ALL.iter().position(|&b| b == self).expect("listed builtin") as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Global {
    Builtin(Builtin),
    /// Index into `Module::functions`.
    Function(usize),
}

/// A compiled program: one code object per function plus the module body.
#[derive(Clone, Debug)]
pub struct Module {
    pub functions: Vec<CodeObject>,
    pub globals: Vec<Global>,
    pub global_names: Vec<String>,
    /// Index of the top-level body in `functions`.
    pub main: usize,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&CodeObject> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }
}
