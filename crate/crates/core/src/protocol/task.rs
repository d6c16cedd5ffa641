use bytes::BufMut;

use crate::error::{Error, Result};

use super::codec::{put_string, Decoder, Wire};
use super::messages::MatrixInfo;

/// Value tags on the wire.
pub mod tag {
    pub const HANDLE: u8 = 0;
    pub const INT: u8 = 1;
    pub const FLOAT: u8 = 2;
    pub const STRING: u8 = 3;
    pub const MATRIX: u8 = 4;
}

/// An argument to, or result of, a library function.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskValue {
    /// Reference to an existing matrix by id.
    Handle(u64),
    Int(i64),
    Float(f64),
    Str(String),
    /// A matrix produced by a task, with its dimensions and layout.
    Matrix(MatrixInfo),
}

impl TaskValue {
    pub fn as_handle(&self) -> Option<u64> {
        match self {
            TaskValue::Handle(id) => Some(*id),
            TaskValue::Matrix(info) => Some(info.id),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            TaskValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            TaskValue::Float(v) => Some(*v),
            TaskValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&MatrixInfo> {
        match self {
            TaskValue::Matrix(info) => Some(info),
            _ => None,
        }
    }
}

impl From<i64> for TaskValue {
    fn from(v: i64) -> Self {
        TaskValue::Int(v)
    }
}

impl From<f64> for TaskValue {
    fn from(v: f64) -> Self {
        TaskValue::Float(v)
    }
}

impl From<&str> for TaskValue {
    fn from(v: &str) -> Self {
        TaskValue::Str(v.to_owned())
    }
}

impl From<&MatrixInfo> for TaskValue {
    fn from(m: &MatrixInfo) -> Self {
        TaskValue::Handle(m.id)
    }
}

impl Wire for TaskValue {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            TaskValue::Handle(id) => {
                out.put_u8(tag::HANDLE);
                out.put_u64_le(*id);
            }
            TaskValue::Int(v) => {
                out.put_u8(tag::INT);
                out.put_i64_le(*v);
            }
            TaskValue::Float(v) => {
                out.put_u8(tag::FLOAT);
                out.put_u64_le(v.to_bits());
            }
            TaskValue::Str(s) => {
                out.put_u8(tag::STRING);
                put_string(out, s);
            }
            TaskValue::Matrix(info) => {
                out.put_u8(tag::MATRIX);
                info.encode(out);
            }
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(match d.u8()? {
            tag::HANDLE => TaskValue::Handle(d.u64()?),
            tag::INT => TaskValue::Int(d.i64()?),
            tag::FLOAT => TaskValue::Float(d.f64()?),
            tag::STRING => TaskValue::Str(d.string()?),
            tag::MATRIX => TaskValue::Matrix(MatrixInfo::decode(d)?),
            other => return Err(Error::Decode(format!("unknown value tag {other}"))),
        })
    }
}

fn encode_values(values: &[TaskValue], out: &mut Vec<u8>) {
    out.put_u32_le(values.len() as u32);
    for v in values {
        v.encode(out);
    }
}

fn decode_values(d: &mut Decoder<'_>) -> Result<Vec<TaskValue>> {
    let n = d.u32()? as usize;
    // each value needs at least a tag and 8 bytes, bound the preallocation
    let mut values = Vec::with_capacity(n.min(d.remaining() / 9 + 1));
    for _ in 0..n {
        values.push(TaskValue::decode(d)?);
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRequest {
    pub lib_id: u32,
    pub function: String,
    pub args: Vec<TaskValue>,
}

impl Wire for TaskRequest {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32_le(self.lib_id);
        put_string(out, &self.function);
        encode_values(&self.args, out);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let lib_id = d.u32()?;
        let function = d.string()?;
        if function.is_empty() {
            return Err(Error::Decode("empty function name".into()));
        }
        Ok(TaskRequest { lib_id, function, args: decode_values(d)? })
    }
}

pub fn encode_task(lib_id: u32, function: &str, args: &[TaskValue]) -> Result<Vec<u8>> {
    if function.is_empty() {
        return Err(Error::InvalidArgument("function name must not be empty".into()));
    }
    Ok(TaskRequest { lib_id, function: function.to_owned(), args: args.to_vec() }.to_payload())
}

pub fn decode_task(payload: &[u8]) -> Result<TaskRequest> {
    TaskRequest::from_payload(payload)
}

/// Values returned by `RUN_TASK`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskResult {
    pub values: Vec<TaskValue>,
}

impl Wire for TaskResult {
    fn encode(&self, out: &mut Vec<u8>) {
        encode_values(&self.values, out);
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        Ok(TaskResult { values: decode_values(d)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::DistPair;
    use crate::protocol::ElemType;
    use proptest::prelude::*;

    #[test]
    fn svd_request_round_trips() {
        let args = vec![TaskValue::Handle(7), TaskValue::Int(10)];
        let payload = encode_task(1, "truncated_svd", &args).unwrap();
        let t = decode_task(&payload).unwrap();
        assert_eq!(t, TaskRequest { lib_id: 1, function: "truncated_svd".into(), args });
    }

    #[test]
    fn empty_args_round_trip() {
        let t = decode_task(&encode_task(2, "reset", &[]).unwrap()).unwrap();
        assert!(t.args.is_empty());
    }

    #[test]
    fn rejects_empty_name_and_unknown_tag() {
        assert!(encode_task(1, "", &[]).is_err());
        let mut payload = encode_task(1, "f", &[TaskValue::Int(1)]).unwrap();
        let tag_pos = payload.len() - 9;
        payload[tag_pos] = 42;
        assert!(matches!(decode_task(&payload), Err(Error::Decode(_))));
    }

    fn value() -> impl Strategy<Value = TaskValue> {
        prop_oneof![
            any::<u64>().prop_map(TaskValue::Handle),
            any::<i64>().prop_map(TaskValue::Int),
            (-1e300f64..1e300).prop_map(TaskValue::Float),
            "[a-zA-Z0-9_ ]{0,24}".prop_map(TaskValue::Str),
            (any::<u64>(), 0u64..1 << 40, 0u64..1 << 40, 0usize..7).prop_map(|(id, m, n, p)| {
                TaskValue::Matrix(MatrixInfo { id, m, n, pair: DistPair::LEGAL[p], elem_type: ElemType::F64 })
            }),
        ]
    }

    proptest! {
        #[test]
        fn random_args_round_trip(
            lib in any::<u32>(),
            name in "[a-z_]{1,20}",
            args in prop::collection::vec(value(), 0..12),
        ) {
            let t = decode_task(&encode_task(lib, &name, &args).unwrap()).unwrap();
            prop_assert_eq!(t, TaskRequest { lib_id: lib, function: name, args: args.clone() });
            let r = TaskResult { values: args };
            prop_assert_eq!(TaskResult::from_payload(&r.to_payload()).unwrap(), r);
        }
    }
}
