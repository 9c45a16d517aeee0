pub mod ctmc;
