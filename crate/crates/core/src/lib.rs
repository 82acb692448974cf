pub mod automata;
pub mod bench;
pub mod learner;
pub mod observation_tree;
pub mod synthesis;
pub mod teacher;
